use super::{binomial_rows, require_subtractive_backend, Kernel, PsiTable, TransformedBoundaries};
use crate::error::Error;
use crate::scalar::Scalar;

/// Two-group Steck recursion,
///
/// `Ψ(m1, m2) = b_m^m1 F(b_m)^m2 - Σ_{k1+k2 <= m-2} M_(k1,k2) Ψ(k1, k2)` with
/// `M_(k1,k2) = C(m1,k1) C(m2,k2) (b_m - b_(k+1))^(m1-k1) (F(b_m) - F(b_(k+1)))^(m2-k2)`,
/// `m = m1 + m2`, `k = k1 + k2`.
///
/// The sum runs over anti-diagonals `k = 0, 1, ...`. Each anti-diagonal starts
/// from a closed-form entry on the first row (`k1 = 0`) or the last column
/// (`k2 = m2`) and walks `(k1, k2) -> (k1 + 1, k2 - 1)` by a ratio update.
pub fn steck_two_group<S: Scalar>(tb: &TransformedBoundaries<S>) -> Result<PsiTable<S>, Error> {
    require_subtractive_backend::<S>(Kernel::Steck)?;
    let (n1, n2) = (tb.n1(), tb.n2());
    let (u, f) = (tb.u(), tb.f());
    let binom = binomial_rows::<S>(n1.max(n2));
    let mut psi = PsiTable::filled(n1, n2, S::one());

    for m1 in 0..=n1 {
        for m2 in 0..=n2 {
            let m = m1 + m2;
            if m == 0 {
                continue;
            }
            let (bm, fm) = (&u[m - 1], &f[m - 1]);
            // Each term is subtracted from the leading power in turn.
            let mut acc = bm.powu(m1 as u64).mul(&fm.powu(m2 as u64));
            for d in 0..m - 1 {
                let db = bm.sub(&u[d]);
                let df = fm.sub(&f[d]);
                if db.is_zero() {
                    // Only k1 = m1 survives the zero power of db.
                    if d >= m1 && d - m1 <= m2 {
                        let k2 = d - m1;
                        let c = binom[m2][k2].mul(&df.powu((m2 - k2) as u64));
                        acc = acc.sub(&c.mul(psi.get(m1, k2)));
                    }
                    continue;
                }
                let (mut k1, mut k2, mut c) = if d <= m2 {
                    let c = binom[m2][d].mul(&db.powu(m1 as u64)).mul(&df.powu((m2 - d) as u64));
                    (0, d, c)
                } else {
                    let j = d - m2;
                    if j > m1 {
                        continue;
                    }
                    (j, m2, binom[m1][j].mul(&db.powu((m1 - j) as u64)))
                };
                let ratio = df.div(&db);
                loop {
                    acc = acc.sub(&c.mul(psi.get(k1, k2)));
                    if k2 == 0 || k1 == m1 {
                        break;
                    }
                    c = c
                        .mul(&ratio)
                        .mul(&S::from_u64((m1 - k1) as u64))
                        .div(&S::from_u64((k1 + 1) as u64))
                        .mul(&S::from_u64(k2 as u64))
                        .div(&S::from_u64((m2 - k2 + 1) as u64));
                    k1 += 1;
                    k2 -= 1;
                }
            }
            psi.set(m1, m2, acc);
        }
    }
    Ok(psi)
}
