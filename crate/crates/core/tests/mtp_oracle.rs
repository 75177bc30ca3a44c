//! Monte Carlo oracles for the exact joint distribution of `(V, R)`.

use ordstat::distributions::normal_cdf;
use ordstat::mtp::{bh_thresholds, fdp_distribution, fdr, joint_vr};
use ordstat::{Cdf, JointVR, ModelSpec, MtpOptions, PairNumber, Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const REPS: usize = 400_000;

/// Draws an alternative p-value for the given cdf.
fn alternative(cdf: &Cdf, rng: &mut ChaCha8Rng) -> f64 {
    match cdf {
        // P(U^(1/k) <= t) = t^k.
        Cdf::Power { k } => rng.gen::<f64>().powf(1.0 / *k as f64),
        Cdf::ZTest { n } => {
            let z: f64 = StandardNormal.sample(rng);
            2.0 * normal_cdf(-(z + (*n as f64).sqrt()).abs())
        }
        other => panic!("no sampler for {other}"),
    }
}

/// Empirical `P(V = j, R = k)`; the null count is drawn per replicate.
fn simulate(m: usize, null_count: impl Fn(&mut ChaCha8Rng) -> usize, cdf: &Cdf, t: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![vec![0usize; m + 1]; m + 1];
    let mut p = vec![(0.0, false); m];
    for _ in 0..REPS {
        let m0 = null_count(&mut rng);
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = if i < m0 { (rng.gen::<f64>(), true) } else { (alternative(cdf, &mut rng), false) };
        }
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let r = (1..=m).rev().find(|&k| p[k - 1].0 <= t[k - 1]).unwrap_or(0);
        let v = p[..r].iter().filter(|x| x.1).count();
        counts[v][r] += 1;
    }
    counts.iter().map(|row| row.iter().map(|&c| c as f64 / REPS as f64).collect()).collect()
}

fn assert_close(exact: &JointVR<PairNumber>, mc: &[Vec<f64>]) {
    for (j, k, p) in exact.cells() {
        let p = p.to_f64();
        let se = (p * (1.0 - p) / REPS as f64).sqrt().max(1e-7);
        let z = (mc[j][k] - p) / se;
        assert!(z.abs() < 4.5, "P(V={j}, R={k}): exact {p}, simulated {} ({z:+.2} SE)", mc[j][k]);
    }
}

fn bh(m: usize, alpha: (u32, u32)) -> (ordstat::StepUpProcedure<PairNumber>, Vec<f64>) {
    let proc = bh_thresholds::<PairNumber>(m, &Rational::from(alpha)).unwrap();
    let t = proc.thresholds().iter().map(|x| x.to_f64()).collect();
    (proc, t)
}

#[test]
fn fixed_model_matches_simulation() {
    let cases = [
        (3, 1, Cdf::Power { k: 3 }, (1, 5)),
        (4, 2, Cdf::ZTest { n: 5 }, (1, 10)),
        (4, 3, Cdf::Power { k: 2 }, (1, 4)),
    ];
    for (i, (m, m0, cdf, alpha)) in cases.into_iter().enumerate() {
        let (proc, t) = bh(m, alpha);
        let model = ModelSpec::fm(m, m0, cdf.clone()).unwrap();
        let exact = joint_vr(&model, &proc, MtpOptions::default()).unwrap();
        let mc = simulate(m, |_| m0, &cdf, &t, 100 + i as u64);
        assert_close(&exact, &mc);
    }
}

#[test]
fn random_model_matches_simulation() {
    let (m, pi0) = (4, 0.6);
    let cdf = Cdf::Power { k: 4 };
    let (proc, t) = bh(m, (1, 5));
    let model = ModelSpec::rm(m, PairNumber::from_f64(pi0), cdf.clone()).unwrap();
    let exact = joint_vr(&model, &proc, MtpOptions::default()).unwrap();
    let mc = simulate(m, |rng| (0..m).filter(|_| rng.gen::<f64>() < pi0).count(), &cdf, &t, 7);
    assert_close(&exact, &mc);
}

#[test]
fn ztest_fdr_identity_and_fdp_atoms() {
    for m in [3, 6, 9] {
        for m0 in 0..=m {
            let (proc, _) = bh(m, (1, 20));
            let model = ModelSpec::fm(m, m0, Cdf::ZTest { n: 5 }).unwrap();
            let vr = joint_vr(&model, &proc, MtpOptions::default()).unwrap();
            let target = m0 as f64 * 0.05 / m as f64;
            assert!((fdr(&vr).to_f64() - target).abs() < 1e-12, "m={m}, m0={m0}");

            let atoms = fdp_distribution(&vr);
            let mass: f64 = atoms.iter().map(|(_, p)| p.to_f64()).sum();
            assert!((mass - 1.0).abs() < 1e-12);
            assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0), "atoms are sorted and distinct");
        }
    }
}
