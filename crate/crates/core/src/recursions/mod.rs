//! Recursions for `Ψ(i1, i2)`, the probability that the order statistics of
//! `i1` Uniform[0,1] variables pooled with `i2` variables of cdf `F` satisfy
//! `X_(1) <= b_1, ..., X_(i1+i2) <= b_(i1+i2)`.
//!
//! All kernels fill the full `(n1+1) x (n2+1)` table, since each `Ψ(i1, i2)`
//! only depends on the first `i1 + i2` thresholds.

mod bolshev;
mod noe;
mod steck;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub use bolshev::{bolshev_one_group, bolshev_two_group};
pub use noe::{noe_two_group, noe_two_group_parallel};
pub use steck::steck_two_group;

use crate::error::Error;
use crate::pair::{k_parameter, FaithfulResult, PairNumber};
use crate::scalar::{counted_eval, Counted, OpCounter, Scalar};

fn check_monotone_unit<S: Scalar>(what: &str, v: &[S]) -> Result<(), Error> {
    let zero = S::zero();
    let one = S::one();
    for (i, x) in v.iter().enumerate() {
        let in_range = matches!(x.compare(&zero), Some(Ordering::Greater | Ordering::Equal))
            && matches!(x.compare(&one), Some(Ordering::Less | Ordering::Equal));
        if !in_range {
            return Err(Error::Boundaries(format!("{what}[{}] = {:?} is outside [0, 1]", i + 1, x)));
        }
        if i > 0 && v[i - 1].compare(x) == Some(Ordering::Greater) {
            return Err(Error::Boundaries(format!("{what} decreases at position {}: {:?} > {:?}", i + 1, v[i - 1], x)));
        }
    }
    Ok(())
}

/// `a(k, j) = C(k, j)` for `0 <= j <= k <= n`, generated by the backward
/// recursion `a(k, k) = 1`, `a(k, j) = a(k, j + 1) (j + 1) / (k - j)` in the
/// working scalar.
pub fn binomial_rows<S: Scalar>(n: usize) -> Vec<Vec<S>> {
    (0..=n)
        .map(|k| {
            let mut row = vec![S::one(); k + 1];
            for j in (0..k).rev() {
                row[j] = row[j + 1].mul(&S::from_u64((j + 1) as u64)).div(&S::from_u64((k - j) as u64));
            }
            row
        })
        .collect()
}

/// Nondecreasing thresholds in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundaries<S>(Vec<S>);

impl<S: Scalar> Boundaries<S> {
    pub fn new(b: Vec<S>) -> Result<Self, Error> {
        check_monotone_unit("b", &b)?;
        Ok(Self(b))
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Thresholds in canonical Uniform-vs-`F` form: `u[i] = b_i` for the uniform
/// group and `f[i] = F(b_i)` for the second group.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedBoundaries<S> {
    n1: usize,
    n2: usize,
    u: Vec<S>,
    f: Vec<S>,
}

impl<S: Scalar> TransformedBoundaries<S> {
    pub fn new(n1: usize, n2: usize, u: Vec<S>, f: Vec<S>) -> Result<Self, Error> {
        if u.len() != n1 + n2 || f.len() != n1 + n2 {
            return Err(Error::Boundaries(format!(
                "expected {} thresholds, got {} and {} cdf values",
                n1 + n2,
                u.len(),
                f.len()
            )));
        }
        check_monotone_unit("b", &u)?;
        check_monotone_unit("F(b)", &f)?;
        Ok(Self { n1, n2, u, f })
    }

    /// One-group case: all `n` variables uniform.
    pub fn one_group(b: Boundaries<S>) -> Self {
        let n = b.len();
        Self { n1: n, n2: 0, f: b.0.clone(), u: b.0 }
    }

    /// Evaluates `F` on the thresholds with the working scalar.
    pub fn with_cdf(n1: usize, n2: usize, b: Boundaries<S>, cdf: impl Fn(&S) -> S) -> Result<Self, Error> {
        let f = b.0.iter().map(cdf).collect();
        Self::new(n1, n2, b.0, f)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn u(&self) -> &[S] {
        &self.u
    }
    pub fn f(&self) -> &[S] {
        &self.f
    }

    /// Same thresholds in another backend.
    pub fn map<T: Scalar>(&self, g: impl Fn(&S) -> T) -> TransformedBoundaries<T> {
        TransformedBoundaries {
            n1: self.n1,
            n2: self.n2,
            u: self.u.iter().map(&g).collect(),
            f: self.f.iter().map(&g).collect(),
        }
    }
}

/// `Ψ(i1, i2)` for `0 <= i1 <= n1`, `0 <= i2 <= n2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiTable<S> {
    n1: usize,
    n2: usize,
    data: Vec<S>,
}

impl<S: Scalar> PsiTable<S> {
    pub(crate) fn filled(n1: usize, n2: usize, value: S) -> Self {
        Self { n1, n2, data: vec![value; (n1 + 1) * (n2 + 1)] }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn get(&self, i1: usize, i2: usize) -> &S {
        assert!(i1 <= self.n1 && i2 <= self.n2, "Ψ({i1},{i2}) outside {}x{} table", self.n1, self.n2);
        &self.data[i1 * (self.n2 + 1) + i2]
    }

    pub(crate) fn set(&mut self, i1: usize, i2: usize, v: S) {
        self.data[i1 * (self.n2 + 1) + i2] = v;
    }

    /// `Ψ(n1, n2)`.
    pub fn full(&self) -> &S {
        self.get(self.n1, self.n2)
    }

    /// Rows of the table, `rows()[i1][i2]`.
    pub fn rows(&self) -> Vec<&[S]> {
        self.data.chunks(self.n2 + 1).collect()
    }

    pub fn map<T: Scalar>(&self, g: impl Fn(&S) -> T) -> PsiTable<T> {
        PsiTable { n1: self.n1, n2: self.n2, data: self.data.iter().map(g).collect() }
    }
}

impl PsiTable<PairNumber> {
    /// Rounds every entry, attaching the certification data of the Noe kernel.
    pub fn faithful(&self) -> Vec<Vec<FaithfulResult>> {
        let k = k_parameter(self.n1 as u64, self.n2 as u64).unwrap_or(0);
        self.rows().iter().map(|row| row.iter().map(|x| FaithfulResult::new(x, k)).collect()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Bolshev,
    Steck,
    Noe,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Bolshev, Kernel::Steck, Kernel::Noe];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Bolshev => "bolshev",
            Kernel::Steck => "steck",
            Kernel::Noe => "noe",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "bolshev" => Ok(Kernel::Bolshev),
            "steck" => Ok(Kernel::Steck),
            "noe" => Ok(Kernel::Noe),
            other => Err(Error::Domain(format!("unknown kernel {other:?}"))),
        }
    }
}

pub(crate) fn require_subtractive_backend<S: Scalar>(kernel: Kernel) -> Result<(), Error> {
    if S::CANCELLATION_FREE_ONLY {
        return Err(Error::UnsupportedBackend { kernel: kernel.name(), backend: S::NAME });
    }
    Ok(())
}

/// Full `Ψ` table with the chosen kernel.
pub fn psi_table<S: Scalar>(kernel: Kernel, tb: &TransformedBoundaries<S>) -> Result<PsiTable<S>, Error> {
    match kernel {
        Kernel::Bolshev => bolshev_two_group(tb),
        Kernel::Steck => steck_two_group(tb),
        Kernel::Noe => Ok(noe_two_group(tb)),
    }
}

/// Same as [`psi_table`]; the Noe kernel runs each layer on `threads`
/// workers (bit-identical to the sequential run), the others ignore it.
pub fn psi_table_threaded<S: Scalar>(
    kernel: Kernel,
    tb: &TransformedBoundaries<S>,
    threads: usize,
) -> Result<PsiTable<S>, Error> {
    match kernel {
        Kernel::Noe => Ok(noe_two_group_parallel(tb, threads)),
        _ => psi_table(kernel, tb),
    }
}

/// Which single-group kernel to use for [`count_operations`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountedKernel {
    /// One-group Bolshev on the `u` thresholds (requires `n2 == 0`).
    BolshevOneGroup,
    TwoGroup(Kernel),
}

/// Instrumented run of a kernel, returning the arithmetic it performed.
pub fn count_operations<S: Scalar>(kernel: CountedKernel, tb: &TransformedBoundaries<S>) -> Result<OpCounter, Error> {
    let counted = tb.map(|x| Counted(x.clone()));
    let (res, ops) = counted_eval(|| match kernel {
        CountedKernel::BolshevOneGroup => {
            if counted.n2() != 0 {
                return Err(Error::Domain("one-group Bolshev needs n2 = 0".into()));
            }
            bolshev_one_group(&Boundaries::new(counted.u().to_vec())?).map(|_| ())
        }
        CountedKernel::TwoGroup(k) => psi_table(k, &counted).map(|_| ()),
    });
    res.map(|_| ops)
}

/// `Ψ` table on complemented, reversed thresholds.
///
/// Given values `upper_u = (x_1, ..., x_m)` and `upper_f = (y_1, ..., y_m)`,
/// evaluates the table for `u = (1 - x_m, ..., 1 - x_1)` and
/// `f = (1 - y_m, ..., 1 - y_1)`. Entry `(i1, i2)` with `i1 + i2 = m - k` is
/// then `Ψ` on `(1 - x_m, ..., 1 - x_(k+1))`.
pub fn suffix_table<S: Scalar>(
    kernel: Kernel,
    upper_u: &[S],
    upper_f: &[S],
    n1: usize,
    n2: usize,
) -> Result<PsiTable<S>, Error> {
    psi_table(kernel, &complemented_suffix(upper_u, upper_f, n1, n2)?)
}

/// The boundaries used by [`suffix_table`]: the last `n1 + n2` values of
/// `upper_u` and `upper_f`, reversed and complemented.
pub fn complemented_suffix<S: Scalar>(
    upper_u: &[S],
    upper_f: &[S],
    n1: usize,
    n2: usize,
) -> Result<TransformedBoundaries<S>, Error> {
    let m = upper_u.len();
    if upper_f.len() != m || n1 + n2 > m {
        return Err(Error::Boundaries(format!(
            "suffix of {} thresholds needs n1 + n2 <= {m}, got {n1} + {n2}",
            upper_f.len()
        )));
    }
    let one = S::one();
    let depth = n1 + n2;
    let u: Vec<S> = upper_u.iter().rev().take(depth).map(|x| one.sub(x)).collect();
    let f: Vec<S> = upper_f.iter().rev().take(depth).map(|x| one.sub(x)).collect();
    TransformedBoundaries::new(n1, n2, u, f)
}

/// `Ψ(n1, n2)` on the complemented suffix `(1 - x_m, ..., 1 - x_(k+1))`,
/// where `n1 + n2 = m - k`. An empty suffix gives 1.
pub fn psi_suffix<S: Scalar>(kernel: Kernel, upper_u: &[S], upper_f: &[S], n1: usize, n2: usize) -> Result<S, Error> {
    if n1 + n2 == 0 {
        return Ok(S::one());
    }
    Ok(suffix_table(kernel, upper_u, upper_f, n1, n2)?.full().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn binomials_from_backward_recursion() {
        let rows = binomial_rows::<Rational>(10);
        assert_eq!(rows[10][3], q(120, 1));
        assert_eq!(rows[0], vec![q(1, 1)]);
        let rows = binomial_rows::<PairNumber>(60);
        assert_eq!(rows[60][30].hi(), 118264581564861424.0);
        assert_eq!(rows[60][30].to_rational(), Rational::from(118264581564861424u64));
    }

    #[test]
    fn validation() {
        assert!(Boundaries::new(vec![q(1, 2), q(1, 4)]).is_err());
        assert!(Boundaries::new(vec![q(-1, 2)]).is_err());
        assert!(Boundaries::new(vec![q(3, 2)]).is_err());
        assert!(Boundaries::new(vec![q(1, 4), q(1, 4), q(1, 1)]).is_ok());
        assert!(TransformedBoundaries::new(1, 1, vec![q(1, 4)], vec![q(1, 4)]).is_err());
        assert!(TransformedBoundaries::new(1, 1, vec![q(1, 4), q(1, 2)], vec![q(1, 2), q(1, 4)]).is_err());
        assert!(Boundaries::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn pair_backend_refused_by_subtractive_kernels() {
        let tb = TransformedBoundaries::new(
            1,
            1,
            vec![PairNumber::from(0.25), PairNumber::from(0.5)],
            vec![PairNumber::from(0.0625), PairNumber::from(0.25)],
        )
        .unwrap();
        assert!(matches!(psi_table(Kernel::Bolshev, &tb), Err(Error::UnsupportedBackend { .. })));
        assert!(matches!(psi_table(Kernel::Steck, &tb), Err(Error::UnsupportedBackend { .. })));
        assert!(psi_table(Kernel::Noe, &tb).is_ok());
    }

    #[test]
    fn suffix_examples() {
        let alpha = q(1, 20);
        // Empty suffix.
        assert_eq!(
            psi_suffix(Kernel::Noe, std::slice::from_ref(&alpha), std::slice::from_ref(&alpha), 0, 0).unwrap(),
            q(1, 1)
        );
        // m = 1, k = 0: Ψ_{1,0}(1 - α) = 1 - α.
        for kernel in Kernel::ALL {
            assert_eq!(
                psi_suffix(kernel, std::slice::from_ref(&alpha), std::slice::from_ref(&alpha), 1, 0).unwrap(),
                q(19, 20)
            );
        }
    }

    #[test]
    fn op_count_requires_one_group_for_algorithm_one() {
        let tb = TransformedBoundaries::new(1, 1, vec![q(1, 4), q(1, 2)], vec![q(1, 4), q(1, 2)]).unwrap();
        assert!(count_operations(CountedKernel::BolshevOneGroup, &tb).is_err());
    }
}
