//! Pair arithmetic with faithful final rounding.
//!
//! A [`PairNumber`] is the unevaluated sum `hi + lo` of two doubles. The
//! operations follow the Lange–Rump pair arithmetic (`CPairSum`, `CPairProd`,
//! `CPairDiv`), each followed by an error-free renormalization so that
//! `|lo| <= ulp(hi)/2` holds between operations. On expression trees without
//! inaccurate cancellation whose tree parameter `k` satisfies
//! `k <= 2^26 - 2`, rounding the final pair to a double is faithful unless an
//! underflow or overflow occurred along the way; both are tracked as sticky
//! flags carried by the value itself.

use std::cmp::Ordering;

use rug::Rational;

use crate::error::Error;
use crate::scalar::{rational_to_nearest_f64, Scalar};

/// Largest tree parameter for which double-precision pair arithmetic is
/// certified faithful.
pub const K_LIMIT: u64 = (1 << 26) - 2;

/// Below this magnitude the rounding error of a product may not be
/// representable, so the error-free transformation stops being exact.
const PRODUCT_EXACT_MIN: f64 = f64::from_bits((1023 - 969) << 52); // 2^-969

const UNDERFLOW: u8 = 1;
const OVERFLOW: u8 = 2;

/// Knuth's TwoSum: `s = fl(a + b)` and `s + e == a + b` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// TwoProduct via fused multiply-add: `p = fl(a * b)` and `p + e == a * b`
/// exactly, provided [`product_underflows`] is false.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    // `mul_add` is a single correctly rounded operation on every target
    // (software fallback when the FPU lacks FMA).
    let e = a.mul_add(b, -p);
    (p, e)
}

/// True when the error term of `two_prod(a, b)` may have lost bits to
/// gradual underflow.
#[inline]
pub fn product_underflows(a: f64, b: f64, p: f64) -> bool {
    a != 0.0 && b != 0.0 && p.abs() < PRODUCT_EXACT_MIN
}

/// Unevaluated sum of two doubles.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairNumber {
    hi: f64,
    lo: f64,
    flags: u8,
}

impl PairNumber {
    pub fn new(hi: f64, lo: f64) -> Self {
        Self::normalized(hi, lo, 0)
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Sticky: set once any operation feeding this value underflowed.
    pub fn underflow(&self) -> bool {
        self.flags & UNDERFLOW != 0
    }

    pub fn overflow(&self) -> bool {
        self.flags & OVERFLOW != 0
    }

    fn normalized(z: f64, zz: f64, mut flags: u8) -> Self {
        let (hi, lo) = two_sum(z, zz);
        if !hi.is_finite() || !lo.is_finite() {
            flags |= OVERFLOW;
        }
        if hi != 0.0 && hi.abs() < f64::MIN_POSITIVE {
            flags |= UNDERFLOW;
        }
        Self { hi, lo, flags }
    }

    pub fn pair_add(&self, y: &Self) -> Self {
        let (z, e) = two_sum(self.hi, y.hi);
        let zz = e + (self.lo + y.lo);
        Self::normalized(z, zz, self.flags | y.flags)
    }

    pub fn pair_sub(&self, y: &Self) -> Self {
        self.pair_add(&y.neg())
    }

    pub fn pair_mul(&self, y: &Self) -> Self {
        let (z, e) = two_prod(self.hi, y.hi);
        let mut flags = self.flags | y.flags;
        if product_underflows(self.hi, y.hi, z) {
            flags |= UNDERFLOW;
        }
        let zz = e + (self.hi * y.lo + self.lo * y.hi);
        Self::normalized(z, zz, flags)
    }

    pub fn pair_div(&self, y: &Self) -> Self {
        let z = self.hi / y.hi;
        let (h, r) = two_prod(z, y.hi);
        let mut flags = self.flags | y.flags;
        if product_underflows(z, y.hi, h) {
            flags |= UNDERFLOW;
        }
        let delta = ((self.hi - h) - r) + (self.lo - z * y.lo);
        let zz = delta / (y.hi + y.lo);
        Self::normalized(z, zz, flags)
    }

    pub fn neg(&self) -> Self {
        Self { hi: -self.hi, lo: -self.lo, flags: self.flags }
    }

    /// `fl(hi + lo)`.
    pub fn faithful_round(&self) -> f64 {
        self.hi + self.lo
    }

    /// Exact value `hi + lo`.
    pub fn to_rational(&self) -> Rational {
        Rational::from_f64(self.hi).unwrap() + Rational::from_f64(self.lo).unwrap()
    }
}

impl PartialEq for PairNumber {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl From<f64> for PairNumber {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0, flags: 0 }
    }
}

impl Scalar for PairNumber {
    const NAME: &'static str = "pair";
    const CANCELLATION_FREE_ONLY: bool = true;

    fn zero() -> Self {
        Self::from(0.0)
    }
    fn one() -> Self {
        Self::from(1.0)
    }
    fn from_u64(n: u64) -> Self {
        let hi = n as f64;
        // Exact for n < 2^106 up to the conversion rounding of hi.
        let lo = (n as i128 - hi as i128) as f64;
        Self::new(hi, lo)
    }
    fn from_f64(x: f64) -> Self {
        Self::from(x)
    }
    fn from_rational(r: &Rational) -> Self {
        let hi = rational_to_nearest_f64(r);
        let rest = r - Rational::from_f64(hi).unwrap_or_default();
        Self::new(hi, rational_to_nearest_f64(&rest))
    }
    fn add(&self, rhs: &Self) -> Self {
        self.pair_add(rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.pair_sub(rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.pair_mul(rhs)
    }
    fn div(&self, rhs: &Self) -> Self {
        self.pair_div(rhs)
    }
    fn compare(&self, rhs: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&rhs.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&rhs.lo),
            o => Some(o),
        }
    }
    fn to_f64(&self) -> f64 {
        self.faithful_round()
    }
}

/// Tree parameter of the Noe kernel's evaluation order,
/// `n1*n2 + 8*(n1 + n2) - 7`.
pub fn k_parameter(n1: u64, n2: u64) -> Result<u64, Error> {
    if n1 + n2 < 2 {
        return Err(Error::Domain(format!("k parameter needs n1 + n2 >= 2, got n1={n1}, n2={n2}")));
    }
    Ok(n1 * n2 + 8 * (n1 + n2) - 7)
}

/// A pair result rounded to a double, with what is needed to audit it.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FaithfulResult {
    pub value: f64,
    pub underflow_flag: bool,
    pub overflow_flag: bool,
    pub k_used: u64,
    pub k_limit: u64,
}

impl FaithfulResult {
    pub fn new(x: &PairNumber, k_used: u64) -> Self {
        Self {
            value: x.faithful_round(),
            underflow_flag: x.underflow(),
            overflow_flag: x.overflow(),
            k_used,
            k_limit: K_LIMIT,
        }
    }

    /// Whether `value` is guaranteed to be a faithful rounding.
    pub fn certified(&self) -> bool {
        !self.underflow_flag && !self.overflow_flag && self.k_used <= self.k_limit
    }
}
