use super::{require_subtractive_backend, Boundaries, Kernel, PsiTable, TransformedBoundaries};
use crate::error::Error;
use crate::scalar::Scalar;

/// One-group Bolshev recursion, `Ψ(n, 0) = P(U_(1) <= b_1, ..., U_(n) <= b_n)`.
///
/// Uses `3n^2 + n - 1` arithmetic operations. `s[j]` holds
/// `C(k, j) (1 - b_(j+1))^(k-j) Ψ(j)` for the current `k`, so that
/// `Ψ(k) = 1 - sum(s)`.
pub fn bolshev_one_group<S: Scalar>(b: &Boundaries<S>) -> Result<S, Error> {
    require_subtractive_backend::<S>(Kernel::Bolshev)?;
    let one = S::one();
    let n = b.len();
    if n == 0 {
        return Ok(one);
    }
    let c: Vec<S> = b.as_slice().iter().map(|x| one.sub(x)).collect();
    let mut s: Vec<S> = Vec::with_capacity(n);
    s.push(c[0].clone());
    for k in 2..=n {
        let kk = S::from_u64(k as u64);
        let mut v = one.clone();
        for j in 1..k {
            v = v.sub(&s[j - 1]);
            let jm1 = S::from_u64(j as u64).sub(&one);
            s[j - 1] = s[j - 1].mul(&c[j - 1]).mul(&kk).div(&kk.sub(&jm1));
        }
        s.push(kk.mul(&v).mul(&c[k - 1]));
    }
    let total = s.iter().fold(S::zero(), |acc, x| acc.add(x));
    Ok(one.sub(&total))
}

/// Two-group Bolshev recursion with in-place coefficient updates.
///
/// `coef[k1][k2]` holds `M^(m1,m2)_(k1,k2) = C(m1,k1) C(m2,k2)
/// (1 - u_(k1+k2+1))^(m1-k1) (1 - f_(k1+k2+1))^(m2-k2)` for the current
/// `(m1, m2)` and is advanced to `(m1, m2 + 1)` while it is consumed; column 0
/// is restored from `col0` when `m1` advances.
pub fn bolshev_two_group<S: Scalar>(tb: &TransformedBoundaries<S>) -> Result<PsiTable<S>, Error> {
    require_subtractive_backend::<S>(Kernel::Bolshev)?;
    let (n1, n2) = (tb.n1(), tb.n2());
    let (v1, v2) = (tb.u(), tb.f());
    let one = S::one();
    let w = n2 + 1;

    let mut r = PsiTable::filled(n1, n2, one.clone());
    let mut coef = vec![one.clone(); (n1 + 1) * w];
    let mut col0 = vec![one.clone(); n1 + 1];

    for m1 in 0..=n1 {
        for m2 in 0..=n2 {
            let mut acc = r.get(m1, m2).clone();
            for k1 in 0..=m1 {
                for k2 in 0..=m2 {
                    if k1 < m1 || k2 < m2 {
                        acc = acc.sub(&coef[k1 * w + k2].mul(r.get(k1, k2)));
                    }
                    if m2 < n2 {
                        let c = &coef[k1 * w + k2];
                        coef[k1 * w + k2] = c
                            .mul(&S::from_u64((m2 + 1) as u64))
                            .div(&S::from_u64((m2 + 1 - k2) as u64))
                            .mul(&one.sub(&v2[k1 + k2]));
                    }
                }
                if m2 < n2 && k1 < m1 {
                    coef[k1 * w + m2 + 1] = coef[(k1 + 1) * w + m2]
                        .mul(&S::from_u64((k1 + 1) as u64))
                        .div(&S::from_u64((m1 - k1) as u64))
                        .mul(&one.sub(&v1[k1 + m2 + 1]));
                }
            }
            r.set(m1, m2, acc);
        }
        if m1 < n1 {
            for k1 in 0..=m1 {
                col0[k1] = col0[k1]
                    .mul(&S::from_u64((m1 + 1) as u64))
                    .div(&S::from_u64((m1 + 1 - k1) as u64))
                    .mul(&one.sub(&v1[k1]));
                coef[k1 * w] = col0[k1].clone();
            }
        }
    }
    Ok(r)
}
