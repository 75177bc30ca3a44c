use rayon::prelude::*;

use super::{binomial_rows, PsiTable, TransformedBoundaries};
use crate::scalar::Scalar;

/// Two-group Noe recursion.
///
/// Layer `m` holds `Q_(i1,i2)(m)` for `m <= i1 + i2 <= n`:
///
/// `Q_(i1,i2)(1) = b_1^i1 F(b_1)^i2`,
/// `Q_(i1,i2)(m) = Σ_{k1 <= i1, k2 <= i2, k1+k2 >= m-1} C(i1,k1) C(i2,k2)
///   (b_m - b_(m-1))^(i1-k1) (F(b_m) - F(b_(m-1)))^(i2-k2) Q_(k1,k2)(m-1)`,
///
/// and `Ψ(i1, i2) = Q_(i1,i2)(i1 + i2)`. Every summand is nonnegative and the
/// only subtractions are of input thresholds, so the kernel is safe for the
/// pair backend. Only the previous layer is kept.
pub fn noe_two_group<S: Scalar>(tb: &TransformedBoundaries<S>) -> PsiTable<S> {
    run(tb, false)
}

/// Same as [`noe_two_group`], computing the cells of each layer on a pool of
/// `threads` workers. Every cell is evaluated in the same order as the
/// sequential kernel, so the output is bit-identical.
pub fn noe_two_group_parallel<S: Scalar>(tb: &TransformedBoundaries<S>, threads: usize) -> PsiTable<S> {
    if threads <= 1 {
        return run(tb, false);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| run(tb, true)),
        Err(_) => run(tb, false),
    }
}

fn powers<S: Scalar>(d: &S, n: usize) -> Vec<S> {
    let mut pow = Vec::with_capacity(n + 1);
    pow.push(S::one());
    for j in 1..=n {
        let next = pow[j - 1].mul(d);
        pow.push(next);
    }
    pow
}

/// `coef[i][k] = C(i, k) d^(i-k)` for `k <= i <= n`.
fn weighted_binomials<S: Scalar>(binom: &[Vec<S>], d: &S, n: usize) -> Vec<Vec<S>> {
    let pow = powers(d, n);
    (0..=n).map(|i| (0..=i).map(|k| binom[i][k].mul(&pow[i - k])).collect()).collect()
}

fn run<S: Scalar>(tb: &TransformedBoundaries<S>, parallel: bool) -> PsiTable<S> {
    let (n1, n2) = (tb.n1(), tb.n2());
    let n = n1 + n2;
    let (u, f) = (tb.u(), tb.f());
    let w = n2 + 1;
    let mut psi = PsiTable::filled(n1, n2, S::one());
    if n == 0 {
        return psi;
    }

    let mut prev = vec![S::zero(); (n1 + 1) * w];
    {
        let pu = powers(&u[0], n1);
        let pf = powers(&f[0], n2);
        for i1 in 0..=n1 {
            for i2 in 0..=n2 {
                if i1 + i2 >= 1 {
                    prev[i1 * w + i2] = pu[i1].mul(&pf[i2]);
                }
            }
        }
    }
    let record = |psi: &mut PsiTable<S>, layer: &[S], m: usize| {
        for i1 in m.saturating_sub(n2)..=m.min(n1) {
            psi.set(i1, m - i1, layer[i1 * w + m - i1].clone());
        }
    };
    record(&mut psi, &prev, 1);

    let binom = binomial_rows::<S>(n1.max(n2));
    let mut cur = vec![S::zero(); (n1 + 1) * w];
    for m in 2..=n {
        let coef1 = weighted_binomials(&binom, &u[m - 1].sub(&u[m - 2]), n1);
        let coef2 = weighted_binomials(&binom, &f[m - 1].sub(&f[m - 2]), n2);
        let cell = |i1: usize, i2: usize| -> S {
            let mut sum = S::zero();
            for k1 in 0..=i1 {
                let k2_min = (m - 1).saturating_sub(k1);
                if k2_min > i2 {
                    continue;
                }
                let mut inner = S::zero();
                for k2 in k2_min..=i2 {
                    inner = inner.add(&coef2[i2][k2].mul(&prev[k1 * w + k2]));
                }
                sum = sum.add(&coef1[i1][k1].mul(&inner));
            }
            sum
        };
        let row = |i1: usize| -> Vec<S> {
            let lo = m.saturating_sub(i1);
            (lo..=n2).map(|i2| cell(i1, i2)).collect()
        };
        let first_row = m.saturating_sub(n2);
        let rows: Vec<Vec<S>> = if parallel {
            (first_row..=n1).into_par_iter().map(row).collect()
        } else {
            (first_row..=n1).map(row).collect()
        };
        for (i1, vals) in (first_row..=n1).zip(rows) {
            let lo = m.saturating_sub(i1);
            for (i2, v) in (lo..=n2).zip(vals) {
                cur[i1 * w + i2] = v;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        record(&mut psi, &prev, m);
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::PairNumber;
    use crate::recursions::bolshev_two_group;
    use rug::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn first_layer_is_product_of_powers() {
        let tb =
            TransformedBoundaries::new(2, 1, vec![q(1, 3), q(1, 2), q(2, 3)], vec![q(1, 5), q(1, 4), q(1, 2)]).unwrap();
        let t = noe_two_group(&tb);
        assert_eq!(*t.get(1, 0), q(1, 3));
        assert_eq!(*t.get(0, 1), q(1, 5));
        assert_eq!(*t.get(0, 0), q(1, 1));
    }

    #[test]
    fn mixed_pair_exact_and_faithful() {
        let tb = TransformedBoundaries::new(1, 1, vec![q(1, 4), q(1, 2)], vec![q(1, 16), q(1, 4)]).unwrap();
        assert_eq!(*noe_two_group(&tb).get(1, 1), q(5, 64));
        let pair = tb.map(PairNumber::from_rational);
        assert_eq!(noe_two_group(&pair).get(1, 1).faithful_round(), 5.0 / 64.0);
    }

    #[test]
    fn matches_bolshev_with_ties_and_zero_steps() {
        let b = vec![q(0, 1), q(1, 8), q(1, 8), q(1, 2), q(3, 4), q(1, 1)];
        let f = vec![q(0, 1), q(0, 1), q(1, 3), q(1, 3), q(1, 2), q(1, 1)];
        let tb = TransformedBoundaries::new(3, 3, b, f).unwrap();
        assert_eq!(noe_two_group(&tb), bolshev_two_group(&tb).unwrap());
    }

    #[test]
    fn parallel_is_bit_identical() {
        let b: Vec<f64> = (1..=30).map(|i| 0.05 * i as f64 / 30.0).collect();
        let f: Vec<f64> = b.iter().map(|x| x.sqrt()).collect();
        let tb = TransformedBoundaries::new(14, 16, b, f).unwrap().map(|x| PairNumber::from(*x));
        let seq = noe_two_group(&tb);
        let par = noe_two_group_parallel(&tb, 4);
        for (a, b) in seq.rows().iter().flat_map(|r| r.iter()).zip(par.rows().iter().flat_map(|r| r.iter())) {
            assert_eq!(a.hi().to_bits(), b.hi().to_bits());
            assert_eq!(a.lo().to_bits(), b.lo().to_bits());
        }
    }
}
