//! The arithmetic contract shared by every recursion kernel.
//!
//! Kernels are written once against [`Scalar`] and instantiated with one of
//! three backends:
//!
//! * `f64`: plain IEEE-754 binary64, round to nearest.
//! * [`PairNumber`](crate::pair::PairNumber): unevaluated sums of two doubles,
//!   giving faithfully rounded results on cancellation-free expression trees.
//! * [`Rational`]: GMP-backed exact rationals, always in lowest terms.
//!
//! [`Counted`] wraps any backend and tallies the arithmetic it performs, which
//! is how the operation-count formulas of the kernels are checked.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::{Integer, Rational};

use crate::error::ParseError;

/// Field operations required by the kernels.
///
/// Only `add`, `sub`, `mul` and `div` count as arithmetic; conversions from
/// integers and literals are free, matching how the kernels' operation counts
/// are stated.
pub trait Scalar: Clone + fmt::Debug + Send + Sync + 'static {
    /// Short backend name used in reports.
    const NAME: &'static str;

    /// Backends that only give guarantees on expression trees without
    /// inaccurate cancellation set this. Kernels that subtract computed
    /// intermediates (Bolshev, Steck) refuse such backends.
    const CANCELLATION_FREE_ONLY: bool = false;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(n: u64) -> Self;
    /// Exact for all backends (every finite double is a rational).
    fn from_f64(x: f64) -> Self;
    /// Exact for the rational backend, nearest representable value otherwise.
    fn from_rational(r: &Rational) -> Self;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;

    fn compare(&self, rhs: &Self) -> Option<Ordering>;

    /// Nearest double (for rationals) or the backend's own rounding to one.
    fn to_f64(&self) -> f64;

    /// Parses a decimal literal (`-1.25e-3`) or a fraction (`3/16`).
    fn from_decimal_str(text: &str) -> Result<Self, ParseError> {
        Ok(Self::from_rational(&parse_number(text)?))
    }

    /// `self^k` by binary exponentiation, `O(log k)` multiplications.
    fn powu(&self, k: u64) -> Self {
        if k == 0 {
            return Self::one();
        }
        let mut base = self.clone();
        let mut exp = k;
        let mut acc: Option<Self> = None;
        loop {
            if exp & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            exp >>= 1;
            if exp == 0 {
                break;
            }
            base = base.mul(&base);
        }
        acc.expect("k > 0 sets at least one bit")
    }

    fn is_zero(&self) -> bool {
        self.compare(&Self::zero()) == Some(Ordering::Equal)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "double";

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_rational(r: &Rational) -> Self {
        rational_to_nearest_f64(r)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn compare(&self, rhs: &Self) -> Option<Ordering> {
        self.partial_cmp(rhs)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    const NAME: &'static str = "rational";

    fn zero() -> Self {
        Rational::new()
    }
    fn one() -> Self {
        Rational::from(1)
    }
    fn from_u64(n: u64) -> Self {
        Rational::from(n)
    }
    fn from_f64(x: f64) -> Self {
        Rational::from_f64(x).expect("finite double")
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    // rug keeps every result canonical (lowest terms, positive denominator).
    fn add(&self, rhs: &Self) -> Self {
        Rational::from(self + rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        Rational::from(self - rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        Rational::from(self * rhs)
    }
    fn div(&self, rhs: &Self) -> Self {
        assert!(*rhs.numer() != 0, "rational division by zero");
        Rational::from(self / rhs)
    }
    fn compare(&self, rhs: &Self) -> Option<Ordering> {
        Some(self.cmp(rhs))
    }
    fn to_f64(&self) -> f64 {
        rational_to_nearest_f64(self)
    }
}

/// Round a rational to the nearest double, ties to even.
pub fn rational_to_nearest_f64(r: &Rational) -> f64 {
    let (down, up) = adjacent_doubles(r);
    if down == up {
        return down;
    }
    if down.is_infinite() || up.is_infinite() {
        return if down.is_infinite() { up } else { down };
    }
    let d = r - Rational::from_f64(down).unwrap();
    let u = Rational::from_f64(up).unwrap() - r;
    match d.cmp(&u) {
        Ordering::Less => down,
        Ordering::Greater => up,
        Ordering::Equal => {
            if down.to_bits() & 1 == 0 {
                down
            } else {
                up
            }
        }
    }
}

/// The two doubles enclosing `r`: `(RD(r), RU(r))`. Equal when `r` is a double.
pub fn adjacent_doubles(r: &Rational) -> (f64, f64) {
    // rug's conversion is close but its rounding direction is not part of the
    // contract we rely on, so correct it against exact comparisons.
    let mut x = r.to_f64();
    if !x.is_finite() {
        return if *r > 0 { (f64::MAX, f64::INFINITY) } else { (f64::NEG_INFINITY, -f64::MAX) };
    }
    loop {
        let rx = Rational::from_f64(x).unwrap();
        match rx.cmp(r) {
            Ordering::Equal => return (x, x),
            Ordering::Greater => {
                let below = x.next_down();
                if Rational::from_f64(below).is_none_or(|b| b < *r) {
                    return (below, x);
                }
                x = below;
            }
            Ordering::Less => {
                let above = x.next_up();
                if Rational::from_f64(above).is_none_or(|a| a > *r) {
                    return (x, above);
                }
                x = above;
            }
        }
    }
}

/// Parses a decimal literal exactly into a rational.
///
/// Accepts an optional sign, digits, an optional fraction and an optional
/// exponent: `0.05`, `-2`, `1e-3`, `.5`, `2.5E+2`.
pub fn parse_decimal(text: &str) -> Result<Rational, ParseError> {
    let err = || ParseError::Malformed(text.to_owned());
    let s = text.trim();
    let (negative, s) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = Integer::from_str(&digits).map_err(|_| err())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent.checked_sub(frac_part.len() as i64).filter(|e| e.unsigned_abs() <= 100_000).ok_or_else(err)?;
    let pow = Integer::from(Integer::u_pow_u(10, scale.unsigned_abs() as u32));
    Ok(if scale >= 0 { Rational::from(numer * pow) } else { Rational::from((numer, pow)) })
}

/// Parses either `p/q` or a decimal literal.
pub fn parse_number(text: &str) -> Result<Rational, ParseError> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p = Integer::from_str(p.trim()).map_err(|_| ParseError::Malformed(text.to_owned()))?;
        let q = Integer::from_str(q.trim()).map_err(|_| ParseError::Malformed(text.to_owned()))?;
        if q == 0 {
            return Err(ParseError::ZeroDenominator(text.to_owned()));
        }
        return Ok(Rational::from((p, q)));
    }
    parse_decimal(t)
}

/// Tally of arithmetic operations performed through [`Counted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct OpCounter {
    pub adds: u64,
    pub subs: u64,
    pub muls: u64,
    pub divs: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.adds + self.subs + self.muls + self.divs
    }
}

thread_local! {
    static COUNTER: Cell<OpCounter> = Cell::new(OpCounter::default());
}

fn bump(f: impl FnOnce(&mut OpCounter)) {
    COUNTER.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

/// Runs `f` and returns its result together with the operations performed by
/// [`Counted`] scalars on this thread while it ran.
///
/// Counting is per thread, so `f` must not hand counted arithmetic to other
/// threads.
pub fn counted_eval<T>(f: impl FnOnce() -> T) -> (T, OpCounter) {
    let saved = COUNTER.with(|c| c.replace(OpCounter::default()));
    let value = f();
    let counts = COUNTER.with(|c| c.replace(saved));
    (value, counts)
}

/// A scalar that counts every contract operation it performs.
#[derive(Clone, Debug, PartialEq)]
pub struct Counted<S>(pub S);

impl<S: Scalar> Scalar for Counted<S> {
    const NAME: &'static str = S::NAME;
    const CANCELLATION_FREE_ONLY: bool = S::CANCELLATION_FREE_ONLY;

    fn zero() -> Self {
        Counted(S::zero())
    }
    fn one() -> Self {
        Counted(S::one())
    }
    fn from_u64(n: u64) -> Self {
        Counted(S::from_u64(n))
    }
    fn from_f64(x: f64) -> Self {
        Counted(S::from_f64(x))
    }
    fn from_rational(r: &Rational) -> Self {
        Counted(S::from_rational(r))
    }
    fn add(&self, rhs: &Self) -> Self {
        bump(|c| c.adds += 1);
        Counted(self.0.add(&rhs.0))
    }
    fn sub(&self, rhs: &Self) -> Self {
        bump(|c| c.subs += 1);
        Counted(self.0.sub(&rhs.0))
    }
    fn mul(&self, rhs: &Self) -> Self {
        bump(|c| c.muls += 1);
        Counted(self.0.mul(&rhs.0))
    }
    fn div(&self, rhs: &Self) -> Self {
        bump(|c| c.divs += 1);
        Counted(self.0.div(&rhs.0))
    }
    fn compare(&self, rhs: &Self) -> Option<Ordering> {
        self.0.compare(&rhs.0)
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("0.05").unwrap(), Rational::from((1, 20)));
        assert_eq!(parse_decimal("2").unwrap(), Rational::from(2));
        assert_eq!(parse_decimal("0.0009765625").unwrap(), Rational::from((1, 1024)));
        assert_eq!(parse_decimal("-1.5e-2").unwrap(), Rational::from((-3, 200)));
        assert_eq!(parse_decimal("2.5E+2").unwrap(), Rational::from(250));
        assert_eq!(parse_decimal(".5").unwrap(), Rational::from((1, 2)));
    }

    #[test]
    fn malformed_literals_are_rejected() {
        for bad in ["", "-", ".", "1.2.3", "abc", "1e", "0x10", "1,5", "e5"] {
            assert!(parse_decimal(bad).is_err(), "{bad:?} parsed");
        }
        assert!(matches!(parse_number("1/0"), Err(ParseError::ZeroDenominator(_))));
        assert_eq!(parse_number(" 6/8 ").unwrap(), Rational::from((3, 4)));
    }

    #[test]
    fn counts_one_increment_per_operation() {
        let a = Counted(2.0f64);
        let b = Counted(3.0f64);
        let c = Counted(4.0f64);
        let (v, ops) = counted_eval(|| a.add(&b.mul(&c)));
        assert_eq!(v.0, 14.0);
        assert_eq!(ops, OpCounter { adds: 1, subs: 0, muls: 1, divs: 0 });
        assert_eq!(ops.total(), 2);
    }

    #[test]
    fn nested_counting_restores_outer_tally() {
        let x = Counted(1.0f64);
        let ((_, inner), outer) = counted_eval(|| {
            let _ = x.add(&x);
            let inner = counted_eval(|| x.mul(&x));
            let _ = x.sub(&x);
            inner
        });
        assert_eq!(inner.total(), 1);
        assert_eq!(outer, OpCounter { adds: 1, subs: 1, muls: 0, divs: 0 });
    }

    #[test]
    fn powu_uses_squaring() {
        let x = Counted(Rational::from((3, 2)));
        let (p, ops) = counted_eval(|| x.powu(13));
        assert_eq!(p.0, Rational::from((1594323, 8192)));
        // 13 = 0b1101: three squarings plus two accumulating multiplies.
        assert_eq!(ops.muls, 5);
        assert_eq!(Rational::from(7).powu(0), Rational::from(1));
    }

    #[test]
    fn nearest_double_rounds_ties_to_even() {
        let one = Rational::from(1);
        let half_ulp = Rational::from((1, 1u64 << 53));
        assert_eq!(rational_to_nearest_f64(&Rational::from(&one + &half_ulp)), 1.0);
        let three_half = &one + Rational::from(&half_ulp * 3);
        assert_eq!(rational_to_nearest_f64(&three_half), 1.0 + f64::EPSILON * 2.0);
        assert_eq!(rational_to_nearest_f64(&Rational::from((1, 3))), 1.0 / 3.0);
    }

    #[test]
    fn adjacent_doubles_bracket() {
        let third = Rational::from((1, 3));
        let (lo, hi) = adjacent_doubles(&third);
        assert!(Rational::from_f64(lo).unwrap() < third);
        assert!(Rational::from_f64(hi).unwrap() > third);
        assert_eq!(lo.next_up(), hi);
        assert_eq!(adjacent_doubles(&Rational::from((1, 4))), (0.25, 0.25));
    }

    proptest! {
        #[test]
        fn rational_field_identities(
            an in -1000i64..1000, ad in 1i64..1000,
            bn in 1i64..1000, bd in 1i64..1000,
        ) {
            let a = Rational::from((an, ad));
            let b = Rational::from((bn, bd));
            prop_assert_eq!(a.div(&b).mul(&b), a.clone());
            prop_assert!(a.sub(&a).is_zero());
            let q = a.div(&b);
            prop_assert!(*q.denom() > 0);
            prop_assert_eq!(q.numer().clone().gcd(q.denom()), 1);
        }

        #[test]
        fn shortest_decimal_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let r = parse_decimal(&format!("{x:e}")).unwrap();
            prop_assert_eq!(rational_to_nearest_f64(&r), x);
        }
    }
}
