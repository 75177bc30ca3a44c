//! Exact joint distribution of false rejections `V` and total rejections `R`
//! of step-up multiple tests, and the summary statistics derived from it.
//!
//! Null p-values are Uniform[0,1], alternative p-values have cdf `F`. Under
//! `FM(m, m0, F)` exactly `m0` of the `m` hypotheses are true; under
//! `RM(m, π0, F)` each hypothesis is true independently with probability
//! `π0`.
//!
//! `SU_t` rejects the `R = k` smallest p-values, where `k` is the largest
//! index with `p_(k) <= t_k`. The event `{R = k}` splits into "exactly the
//! `k` smallest are `<= t_k`" and "the other `m - k` satisfy
//! `p_(i) > t_i` for `i > k`". On the scale `1 - p` the second part is an
//! order-statistics event with thresholds `1 - t_m <= ... <= 1 - t_(k+1)`, so
//! one `Ψ` table on the complemented, reversed thresholds serves every `k`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rug::Rational;

use crate::distributions::Cdf;
use crate::error::Error;
use crate::recursions::{binomial_rows, complemented_suffix, psi_table_threaded, Kernel, PsiTable};
use crate::scalar::Scalar;

/// Critical values `0 < t_1 <= ... <= t_m < 1` of a step-up procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUpProcedure<S> {
    t: Vec<S>,
}

impl<S: Scalar> StepUpProcedure<S> {
    pub fn new(t: Vec<S>) -> Result<Self, Error> {
        let (zero, one) = (S::zero(), S::one());
        for (i, x) in t.iter().enumerate() {
            if x.compare(&zero) != Some(Ordering::Greater) || x.compare(&one) != Some(Ordering::Less) {
                return Err(Error::Boundaries(format!("critical value t_{} = {x:?} is outside (0, 1)", i + 1)));
            }
            if i > 0 && t[i - 1].compare(x) == Some(Ordering::Greater) {
                return Err(Error::Boundaries(format!("critical values decrease at position {}", i + 1)));
            }
        }
        if t.is_empty() {
            return Err(Error::Boundaries("a step-up procedure needs at least one critical value".into()));
        }
        Ok(StepUpProcedure { t })
    }

    pub fn thresholds(&self) -> &[S] {
        &self.t
    }

    pub fn m(&self) -> usize {
        self.t.len()
    }
}

/// Benjamini-Hochberg critical values `t_i = i α / m`, each computed exactly
/// and converted once to the working scalar.
pub fn bh_thresholds<S: Scalar>(m: usize, alpha: &Rational) -> Result<StepUpProcedure<S>, Error> {
    if m == 0 {
        return Err(Error::Domain("the number of hypotheses must be at least 1".into()));
    }
    StepUpProcedure::new((1..=m).map(|i| S::from_rational(&(Rational::from(alpha * i as u64) / m as u64))).collect())
}

/// How the number of true null hypotheses is determined.
#[derive(Debug, Clone, PartialEq)]
pub enum NullCount<S> {
    /// `FM(m, m0, F)`: exactly `m0` true nulls.
    Fixed(usize),
    /// `RM(m, π0, F)`: each hypothesis is a true null with probability `π0`.
    Random(S),
}

/// A p-value model: `m` hypotheses, the null count, and the alternative cdf.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<S> {
    m: usize,
    nulls: NullCount<S>,
    cdf: Cdf,
}

impl<S: Scalar> ModelSpec<S> {
    pub fn fm(m: usize, m0: usize, cdf: Cdf) -> Result<Self, Error> {
        Self::check_cdf(&cdf)?;
        if m0 > m {
            return Err(Error::Model(format!("m0 = {m0} exceeds m = {m}")));
        }
        Ok(ModelSpec { m, nulls: NullCount::Fixed(m0), cdf })
    }

    pub fn rm(m: usize, pi0: S, cdf: Cdf) -> Result<Self, Error> {
        Self::check_cdf(&cdf)?;
        let in_unit = matches!(pi0.compare(&S::zero()), Some(Ordering::Greater | Ordering::Equal))
            && matches!(pi0.compare(&S::one()), Some(Ordering::Less | Ordering::Equal));
        if !in_unit {
            return Err(Error::Model(format!("pi0 = {pi0:?} is outside [0, 1]")));
        }
        Ok(ModelSpec { m, nulls: NullCount::Random(pi0), cdf })
    }

    fn check_cdf(cdf: &Cdf) -> Result<(), Error> {
        if cdf.on_unit_interval() {
            Ok(())
        } else {
            Err(Error::Model(format!("the alternative p-value cdf {cdf} must live on [0, 1]")))
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nulls(&self) -> &NullCount<S> {
        &self.nulls
    }

    pub fn cdf(&self) -> &Cdf {
        &self.cdf
    }

    fn check_procedure(&self, proc: &StepUpProcedure<S>) -> Result<(), Error> {
        if proc.m() != self.m {
            return Err(Error::Model(format!("{} critical values for m = {}", proc.m(), self.m)));
        }
        Ok(())
    }
}

/// Which kernel evaluates `Ψ`, and on how many threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MtpOptions {
    pub kernel: Kernel,
    pub threads: usize,
}

impl Default for MtpOptions {
    fn default() -> Self {
        MtpOptions { kernel: Kernel::Noe, threads: 1 }
    }
}

/// `P(V = j, R = k)` for `0 <= j <= k <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVR<S> {
    m: usize,
    /// `p[j][k]`, zero for `j > k`.
    p: Vec<Vec<S>>,
}

impl<S: Scalar> JointVR<S> {
    fn zeros(m: usize) -> Self {
        JointVR { m, p: vec![vec![S::zero(); m + 1]; m + 1] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `P(V = j, R = k)`.
    pub fn get(&self, j: usize, k: usize) -> &S {
        &self.p[j][k]
    }

    /// Nonzero-capable cells `(j, k, p)` with `j <= k`, ordered by `k` then `j`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &S)> {
        (0..=self.m).flat_map(move |k| (0..=k).map(move |j| (j, k, &self.p[j][k])))
    }

    /// Sum of all entries.
    pub fn total(&self) -> S {
        self.cells().fold(S::zero(), |acc, (_, _, p)| acc.add(p))
    }

    /// `P(R = k)` for `k = 0..=m`.
    pub fn rejections(&self) -> Vec<S> {
        (0..=self.m).map(|k| (0..=k).fold(S::zero(), |acc, j| acc.add(&self.p[j][k]))).collect()
    }

    pub fn map<T: Scalar>(&self, g: impl Fn(&S) -> T) -> JointVR<T> {
        JointVR { m: self.m, p: self.p.iter().map(|r| r.iter().map(&g).collect()).collect() }
    }
}

fn power_or_one<S: Scalar>(x: &S, e: usize) -> S {
    x.powu(e as u64)
}

/// Joint distribution under `FM(m, m0, F)`:
///
/// `P(V = j, R = k) = C(m0, j) C(m - m0, k - j) t_k^j F(t_k)^(k-j)
///   Ψ^{Uni, F̄}_(m0 - j, m - m0 - (k - j))(1 - t_m, ..., 1 - t_(k+1))`
///
/// with `F̄(s) = 1 - F(1 - s)`, the cdf of `1 - p` for an alternative p-value.
/// The first `Ψ` index counts the remaining true nulls (uniform on the
/// `1 - p` scale), the second the remaining false ones.
pub fn joint_vr_fm<S: Scalar>(
    m: usize,
    m0: usize,
    cdf: &Cdf,
    proc: &StepUpProcedure<S>,
    opts: MtpOptions,
) -> Result<JointVR<S>, Error> {
    let model = ModelSpec::<S>::fm(m, m0, cdf.clone())?;
    model.check_procedure(proc)?;
    let m1 = m - m0;
    let t = proc.thresholds();
    let ft: Vec<S> = t.iter().map(|x| cdf.eval_scalar(x)).collect();
    let tb = complemented_suffix(t, &ft, m0, m1)?;
    let psi: PsiTable<S> = psi_table_threaded(opts.kernel, &tb, opts.threads)?;
    let binom = binomial_rows::<S>(m);

    let mut vr = JointVR::zeros(m);
    for k in 0..=m {
        let (tk, fk) = if k == 0 { (S::one(), S::one()) } else { (t[k - 1].clone(), ft[k - 1].clone()) };
        for j in k.saturating_sub(m1)..=k.min(m0) {
            let v = binom[m0][j]
                .mul(&binom[m1][k - j])
                .mul(&power_or_one(&tk, j))
                .mul(&power_or_one(&fk, k - j))
                .mul(psi.get(m0 - j, m1 - (k - j)));
            vr.p[j][k] = v;
        }
    }
    Ok(vr)
}

/// Joint distribution under `RM(m, π0, F)`:
///
/// `P(V = j, R = k) = C(m, k) C(k, j) π̃0^j (1 - π̃0)^(k-j) G(t_k)^k
///   Ψ_(m-k, 0)(1 - G(t_m), ..., 1 - G(t_(k+1)))`
///
/// with `G(t) = π0 t + (1 - π0) F(t)` and `π̃0 = π0 t_k / G(t_k)`. The
/// prefactor is evaluated as `(π0 t_k)^j ((1 - π0) F(t_k))^(k-j)`, which is
/// the same quantity without the division (and stays defined when
/// `G(t_k) = 0`).
pub fn joint_vr_rm<S: Scalar>(
    m: usize,
    pi0: &S,
    cdf: &Cdf,
    proc: &StepUpProcedure<S>,
    opts: MtpOptions,
) -> Result<JointVR<S>, Error> {
    let model = ModelSpec::rm(m, pi0.clone(), cdf.clone())?;
    model.check_procedure(proc)?;
    let one = S::one();
    let pi1 = one.sub(pi0);
    let t = proc.thresholds();
    let null_part: Vec<S> = t.iter().map(|x| pi0.mul(x)).collect();
    let alt_part: Vec<S> = t.iter().map(|x| pi1.mul(&cdf.eval_scalar(x))).collect();
    let g: Vec<S> = null_part.iter().zip(&alt_part).map(|(a, b)| a.add(b)).collect();
    let tb = complemented_suffix(&g, &g, m, 0)?;
    let psi = psi_table_threaded(opts.kernel, &tb, opts.threads)?;
    let binom = binomial_rows::<S>(m);

    let mut vr = JointVR::zeros(m);
    for k in 0..=m {
        let (a, b) =
            if k == 0 { (one.clone(), one.clone()) } else { (null_part[k - 1].clone(), alt_part[k - 1].clone()) };
        for j in 0..=k {
            vr.p[j][k] = binom[m][k]
                .mul(&binom[k][j])
                .mul(&power_or_one(&a, j))
                .mul(&power_or_one(&b, k - j))
                .mul(psi.get(m - k, 0));
        }
    }
    Ok(vr)
}

/// Joint distribution for either model.
pub fn joint_vr<S: Scalar>(
    model: &ModelSpec<S>,
    proc: &StepUpProcedure<S>,
    opts: MtpOptions,
) -> Result<JointVR<S>, Error> {
    match &model.nulls {
        NullCount::Fixed(m0) => joint_vr_fm(model.m, *m0, &model.cdf, proc, opts),
        NullCount::Random(pi0) => joint_vr_rm(model.m, pi0, &model.cdf, proc, opts),
    }
}

/// False discovery rate `E[V / (R ∨ 1)]`.
pub fn fdr<S: Scalar>(vr: &JointVR<S>) -> S {
    vr.cells()
        .filter(|&(j, _, _)| j > 0)
        .fold(S::zero(), |acc, (j, k, p)| acc.add(&S::from_u64(j as u64).mul(p).div(&S::from_u64(k as u64))))
}

/// Distribution of the false discovery proportion `V / (R ∨ 1)`, as atoms
/// keyed by the exact reduced fraction, in increasing order.
pub fn fdp_distribution<S: Scalar>(vr: &JointVR<S>) -> Vec<(Rational, S)> {
    let mut atoms: BTreeMap<Rational, S> = BTreeMap::new();
    for (j, k, p) in vr.cells() {
        let key = Rational::from((j as u64, k.max(1) as u64));
        let slot = atoms.entry(key).or_insert_with(S::zero);
        *slot = slot.add(p);
    }
    atoms.into_iter().collect()
}

/// `E[(R - V) / (m - m0)]` for a table computed under `FM(m, m0, F)`;
/// zero when `m0 = m`.
pub fn avg_power_given<S: Scalar>(vr: &JointVR<S>, m0: usize) -> S {
    let m1 = vr.m - m0.min(vr.m);
    if m1 == 0 {
        return S::zero();
    }
    let d = S::from_u64(m1 as u64);
    vr.cells().fold(S::zero(), |acc, (j, k, p)| acc.add(&S::from_u64((k - j) as u64).mul(p).div(&d)))
}

/// `P((R - V) / (m - m0) >= λ)` for a table computed under `FM(m, m0, F)`,
/// comparing `R - V >= λ (m - m0)` exactly; zero when `m0 = m`.
pub fn lambda_power_given<S: Scalar>(vr: &JointVR<S>, m0: usize, lambda: &Rational) -> S {
    let m1 = vr.m - m0.min(vr.m);
    if m1 == 0 {
        return S::zero();
    }
    let need = Rational::from(lambda * m1 as u64);
    vr.cells().filter(|&(j, k, _)| (k - j) as u64 >= need).fold(S::zero(), |acc, (_, _, p)| acc.add(p))
}

fn check_lambda(lambda: &Rational) -> Result<(), Error> {
    if *lambda > 0 && *lambda <= 1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must lie in (0, 1], got {lambda}")))
    }
}

/// Mixes a per-`m0` statistic over `M0 ~ Binomial(m, π0)`.
fn mix_over_m0<S: Scalar>(m: usize, pi0: &S, mut stat: impl FnMut(usize) -> Result<S, Error>) -> Result<S, Error> {
    let binom = binomial_rows::<S>(m);
    let pi1 = S::one().sub(pi0);
    let mut total = S::zero();
    for (m0, c) in binom[m].iter().enumerate() {
        let w = c.mul(&pi0.powu(m0 as u64)).mul(&pi1.powu((m - m0) as u64));
        total = total.add(&w.mul(&stat(m0)?));
    }
    Ok(total)
}

/// Average power `E[(R - V) / (m - M0)]` with `0/0 = 0`.
pub fn avg_power<S: Scalar>(model: &ModelSpec<S>, proc: &StepUpProcedure<S>, opts: MtpOptions) -> Result<S, Error> {
    model.check_procedure(proc)?;
    match &model.nulls {
        NullCount::Fixed(m0) => Ok(avg_power_given(&joint_vr_fm(model.m, *m0, &model.cdf, proc, opts)?, *m0)),
        NullCount::Random(pi0) => mix_over_m0(model.m, pi0, |m0| {
            if m0 == model.m {
                return Ok(S::zero());
            }
            Ok(avg_power_given(&joint_vr_fm(model.m, m0, &model.cdf, proc, opts)?, m0))
        }),
    }
}

/// λ-power `P((R - V) / (m - M0) >= λ)` with `0/0 = 0`, for `λ ∈ (0, 1]`.
pub fn lambda_power<S: Scalar>(
    model: &ModelSpec<S>,
    proc: &StepUpProcedure<S>,
    lambda: &Rational,
    opts: MtpOptions,
) -> Result<S, Error> {
    check_lambda(lambda)?;
    model.check_procedure(proc)?;
    match &model.nulls {
        NullCount::Fixed(m0) => {
            Ok(lambda_power_given(&joint_vr_fm(model.m, *m0, &model.cdf, proc, opts)?, *m0, lambda))
        }
        NullCount::Random(pi0) => mix_over_m0(model.m, pi0, |m0| {
            if m0 == model.m {
                return Ok(S::zero());
            }
            Ok(lambda_power_given(&joint_vr_fm(model.m, m0, &model.cdf, proc, opts)?, m0, lambda))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::PairNumber;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn bh_rational(m: usize, alpha: Rational) -> StepUpProcedure<Rational> {
        bh_thresholds(m, &alpha).unwrap()
    }

    fn bh_double(m: usize, alpha: Rational) -> StepUpProcedure<f64> {
        bh_thresholds(m, &alpha).unwrap()
    }

    const EXACT: MtpOptions = MtpOptions { kernel: Kernel::Bolshev, threads: 1 };

    #[test]
    fn bh_examples() {
        let t = bh_double(4, q(1, 20));
        assert_eq!(t.thresholds(), &[0.0125, 0.025, 0.0375, 0.05]);
        let t = bh_rational(1, q(1, 20));
        assert_eq!(t.thresholds(), &[q(1, 20)]);
        let t = bh_rational(7, q(1, 10));
        assert!(t.thresholds().windows(2).all(|w| w[0] < w[1]));
        assert!(bh_thresholds::<f64>(0, &q(1, 20)).is_err());
        assert!(StepUpProcedure::new(vec![0.1, 0.05]).is_err());
        assert!(StepUpProcedure::new(vec![0.0, 0.05]).is_err());
    }

    #[test]
    fn single_hypothesis() {
        let alpha = q(1, 20);
        let proc = bh_rational(1, alpha.clone());
        let vr = joint_vr_fm(1, 1, &Cdf::Uniform, &proc, EXACT).unwrap();
        assert_eq!(*vr.get(1, 1), alpha);
        assert_eq!(*vr.get(0, 0), q(19, 20));
        let f = Cdf::Power { k: 2 };
        let vr = joint_vr_fm(1, 0, &f, &proc, EXACT).unwrap();
        assert_eq!(*vr.get(0, 1), q(1, 400));
        assert_eq!(*vr.get(0, 0), q(399, 400));
        assert_eq!(avg_power(&ModelSpec::fm(1, 0, f).unwrap(), &proc, EXACT).unwrap(), q(1, 400));
    }

    #[test]
    fn two_hypotheses_by_hand() {
        // One null X ~ U[0,1], one alternative Y with F(t) = t^2:
        // R = 2 iff max <= t2; R = 1 iff the larger exceeds t2 and the
        // smaller is <= t1.
        let (t1, t2) = (q(1, 20), q(1, 10));
        let proc = StepUpProcedure::new(vec![t1.clone(), t2.clone()]).unwrap();
        let vr = joint_vr_fm(2, 1, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
        let f = |x: &Rational| Rational::from(x * x);
        let one = Rational::from(1);
        assert_eq!(*vr.get(1, 2), Rational::from(&t2 * &f(&t2)));
        assert_eq!(*vr.get(1, 1), (&t1 * (&one - f(&t2))));
        assert_eq!(*vr.get(0, 1), (f(&t1) * Rational::from(&one - &t2)));
        assert_eq!(*vr.get(0, 2), 0);
        assert_eq!(*vr.get(2, 2), 0);
        assert_eq!(vr.total(), 1);
    }

    #[test]
    fn kernels_agree_and_normalize_exactly() {
        let proc = bh_rational(6, q(1, 5));
        for m0 in 0..=6 {
            let f = Cdf::Power { k: 3 };
            let a = joint_vr_fm(6, m0, &f, &proc, EXACT).unwrap();
            for kernel in [Kernel::Steck, Kernel::Noe] {
                assert_eq!(a, joint_vr_fm(6, m0, &f, &proc, MtpOptions { kernel, threads: 1 }).unwrap());
            }
            assert_eq!(a.total(), 1);
            for (j, k, p) in a.cells() {
                if j > m0 || k - j > 6 - m0 {
                    assert_eq!(*p, 0);
                }
            }
        }
    }

    #[test]
    fn rm_with_all_nulls_is_fm_with_all_nulls() {
        let proc = bh_rational(5, q(1, 10));
        let f = Cdf::Power { k: 2 };
        let rm = joint_vr_rm(5, &Rational::from(1), &f, &proc, EXACT).unwrap();
        let fm = joint_vr_fm(5, 5, &f, &proc, EXACT).unwrap();
        assert_eq!(rm, fm);
    }

    #[test]
    fn rm_is_binomial_mixture_of_fm() {
        let m = 5;
        let proc = bh_rational(m, q(1, 10));
        let f = Cdf::Power { k: 2 };
        let pi0 = q(3, 10);
        let rm = joint_vr_rm(m, &pi0, &f, &proc, EXACT).unwrap();
        let binom = binomial_rows::<Rational>(m);
        let mut mix = JointVR::<Rational>::zeros(m);
        for (m0, c) in binom[m].iter().enumerate() {
            let w = c.mul(&pi0.powu(m0 as u64)).mul(&Rational::from(1 - &pi0).powu((m - m0) as u64));
            let fm = joint_vr_fm(m, m0, &f, &proc, EXACT).unwrap();
            for (j, k, p) in fm.cells() {
                mix.p[j][k] += Rational::from(&w * p);
            }
        }
        assert_eq!(rm, mix);
    }

    #[test]
    fn rm_single_hypothesis() {
        // m = 1: R = 1 iff p <= t_1, split by whether the hypothesis is null.
        let alpha = q(1, 20);
        let proc = bh_rational(1, alpha.clone());
        let pi0 = q(2, 5);
        let vr = joint_vr_rm(1, &pi0, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
        let g = Rational::from(&pi0 * &alpha) + Rational::from(1 - &pi0) * Rational::from(&alpha * &alpha);
        assert_eq!(*vr.get(1, 1), Rational::from(&pi0 * &alpha));
        assert_eq!(*vr.get(0, 1), Rational::from(1 - &pi0) * Rational::from(&alpha * &alpha));
        assert_eq!(*vr.get(0, 0), Rational::from(1 - &g));
    }

    #[test]
    fn fdr_identity_exact() {
        // BH under independence: FDR = m0 α / m.
        let alpha = q(1, 10);
        for m in 1..=6 {
            let proc = bh_rational(m, alpha.clone());
            for m0 in 0..=m {
                let vr = joint_vr_fm(m, m0, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
                assert_eq!(fdr(&vr), Rational::from(&alpha * m0 as u64) / m as u64, "m {m} m0 {m0}");
            }
        }
    }

    #[test]
    fn fdr_when_every_rejection_is_false() {
        let proc = bh_rational(4, q(1, 20));
        let vr = joint_vr_fm(4, 4, &Cdf::Uniform, &proc, EXACT).unwrap();
        let p_reject = Rational::from(1 - vr.get(0, 0));
        assert_eq!(fdr(&vr), p_reject);
    }

    #[test]
    fn fdp_atoms_merge_equal_ratios() {
        let proc = bh_rational(4, q(1, 2));
        let vr = joint_vr_fm(4, 2, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
        let atoms = fdp_distribution(&vr);
        let total = atoms.iter().fold(Rational::new(), |acc, (_, p)| acc + p);
        assert_eq!(total, 1);
        let half = atoms.iter().find(|(v, _)| *v == q(1, 2)).unwrap().1.clone();
        assert_eq!(half, Rational::from(vr.get(1, 2) + vr.get(2, 4)));
        assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn power_conventions() {
        let proc = bh_rational(3, q(1, 20));
        let f = Cdf::Power { k: 2 };
        let all_null = ModelSpec::fm(3, 3, f.clone()).unwrap();
        assert_eq!(avg_power(&all_null, &proc, EXACT).unwrap(), 0);
        assert_eq!(lambda_power(&all_null, &proc, &q(1, 2), EXACT).unwrap(), 0);
        let model = ModelSpec::fm(3, 1, f).unwrap();
        assert!(lambda_power(&model, &proc, &Rational::new(), EXACT).is_err());
        let mut prev = Rational::from(2);
        for l in 1..=10 {
            let v = lambda_power(&model, &proc, &q(l, 10), EXACT).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        // Small λ: at least one of the two false hypotheses is rejected.
        let vr = joint_vr_fm(3, 1, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
        let at_least_one = vr.cells().filter(|&(j, k, _)| k > j).fold(Rational::new(), |a, (_, _, p)| a + p);
        assert_eq!(lambda_power(&model, &proc, &q(1, 1000), EXACT).unwrap(), at_least_one);
    }

    #[test]
    fn lambda_uses_real_valued_comparison() {
        // m - m0 = 3, λ = 1/2: need R - V >= 1.5, i.e. at least 2.
        let proc = bh_rational(4, q(1, 2));
        let vr = joint_vr_fm(4, 1, &Cdf::Power { k: 2 }, &proc, EXACT).unwrap();
        let two_or_more = vr.cells().filter(|&(j, k, _)| k - j >= 2).fold(Rational::new(), |a, (_, _, p)| a + p);
        assert_eq!(lambda_power_given(&vr, 1, &q(1, 2)), two_or_more);
    }

    #[test]
    fn rm_power_mixes_fm_power() {
        let proc = bh_rational(4, q(1, 10));
        let f = Cdf::Power { k: 2 };
        let rm = ModelSpec::rm(4, q(1, 2), f.clone()).unwrap();
        let mut expect = Rational::new();
        for m0 in 0..4usize {
            let w = binomial_rows::<Rational>(4)[4][m0].clone() / 16u32;
            expect += w * avg_power(&ModelSpec::fm(4, m0, f.clone()).unwrap(), &proc, EXACT).unwrap();
        }
        assert_eq!(avg_power(&rm, &proc, EXACT).unwrap(), expect);
    }

    #[test]
    fn pair_backend_matches_exact() {
        let m = 8;
        let proc_q = bh_rational(m, q(1, 10));
        let proc_p = StepUpProcedure::new(proc_q.thresholds().iter().map(PairNumber::from_rational).collect()).unwrap();
        let f = Cdf::Power { k: 3 };
        let exact = joint_vr_fm(m, 3, &f, &proc_q, EXACT).unwrap();
        let pair = joint_vr_fm(m, 3, &f, &proc_p, MtpOptions::default()).unwrap();
        for ((_, _, a), (_, _, b)) in exact.cells().zip(pair.cells()) {
            assert!((a.to_f64() - b.to_f64()).abs() <= 1e-15 * a.to_f64().abs() + 1e-300);
        }
        assert!((pair.total().to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_validation() {
        assert!(ModelSpec::<f64>::fm(3, 4, Cdf::Uniform).is_err());
        assert!(ModelSpec::<f64>::rm(3, 1.5, Cdf::Uniform).is_err());
        assert!(ModelSpec::<f64>::fm(3, 1, Cdf::Normal { mean: 0.0, sd: 1.0 }).is_err());
        let proc = bh_double(2, q(1, 20));
        assert!(joint_vr_fm(3, 1, &Cdf::Uniform, &proc, MtpOptions::default()).is_err());
    }
}
