//! Continuous cdfs used as the second-group distribution `F` and as p-value
//! alternatives, and the reduction of a general two-cdf problem to the
//! Uniform-vs-`F` form consumed by the recursions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, ParseError};
use crate::recursions::TransformedBoundaries;
use crate::scalar::Scalar;

/// Poisson mass left out of the noncentral chi-square series.
pub const SERIES_TOLERANCE: f64 = 1e-15;

/// Standard normal cdf, `Φ(x) = erfc(-x/√2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Below this argument the regularized incomplete gamma functions are
/// summed here from the power series; statrs rounds them to 0 and 1 there.
const TINY_GAMMA_ARG: f64 = 1e-10;

/// `P(a, x) = x^a e^{-x} / Γ(a + 1) · Σ_n x^n / ((a + 1) ... (a + n))`.
fn tiny_gamma_lr(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 1.0;
    while term > f64::EPSILON * sum {
        term *= x / (a + n);
        sum += term;
        n += 1.0;
    }
    (a * x.ln() - x - ln_gamma(a + 1.0)).exp() * sum
}

/// Regularized lower incomplete gamma function.
pub fn gamma_lr(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < TINY_GAMMA_ARG {
        tiny_gamma_lr(a, x)
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma function.
pub fn gamma_ur(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < TINY_GAMMA_ARG {
        1.0 - tiny_gamma_lr(a, x)
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile `Φ^{-1}(p)`: inverse complementary error function
/// followed by one Newton step on `Φ`. The lower tail is solved directly and
/// the upper tail by symmetry, so small tail probabilities keep their
/// relative accuracy.
pub fn normal_quantile(p: f64) -> Result<f64, Error> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_normal_quantile(1.0 - p));
    }
    Ok(lower_normal_quantile(p))
}

fn lower_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let d = normal_pdf(x);
    if d > 0.0 && x.is_finite() {
        x - (normal_cdf(x) - p) / d
    } else {
        x
    }
}

/// P-value cdf of the two-sided one-sample z-test with sample size `n` and
/// unit effect:
/// `F(t) = 1 + Φ(Φ^{-1}(t/2) - √N) - Φ(Φ^{-1}(1 - t/2) - √N)`.
///
/// With `c = -Φ^{-1}(t/2) >= 0` this is `Φ(-c - √N) + Φ(√N - c)`, which is
/// how it is evaluated: both terms are positive, so nothing cancels.
pub fn ztest_alt_cdf(t: f64, n: u32) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let c = -lower_normal_quantile(0.5 * t);
    let s = f64::from(n).sqrt();
    (normal_cdf(-c - s) + normal_cdf(s - c)).clamp(0.0, 1.0)
}

/// Poisson(`lambda`) weights `(j, w_j)` covering all but
/// [`SERIES_TOLERANCE`] of the mass, walked outwards from the mode so that
/// large `lambda` does not underflow the first weight.
fn poisson_weights(lambda: f64) -> Vec<(u64, f64)> {
    if lambda == 0.0 {
        return vec![(0, 1.0)];
    }
    let mode = lambda.floor() as u64;
    let weight = |j: u64| (-lambda + j as f64 * lambda.ln() - ln_gamma(j as f64 + 1.0)).exp();
    let mut out = vec![(mode, weight(mode))];
    let mut mass = out[0].1;
    let (mut down, mut up) = (mode, mode);
    let (mut w_down, mut w_up) = (out[0].1, out[0].1);
    while 1.0 - mass > SERIES_TOLERANCE {
        let before = mass;
        if down > 0 {
            w_down *= down as f64 / lambda;
            down -= 1;
            out.push((down, w_down));
            mass += w_down;
        }
        up += 1;
        w_up *= lambda / up as f64;
        out.push((up, w_up));
        mass += w_up;
        if mass == before {
            break;
        }
    }
    out
}

/// Noncentral chi-square cdf with `nu` degrees of freedom and noncentrality
/// `mu`, as the Poisson mixture
/// `Σ_j e^{-μ/2} (μ/2)^j / j! · P((ν + 2j)/2, x/2)` with `P` the regularized
/// lower incomplete gamma function.
pub fn noncentral_chisq_cdf(x: f64, nu: u32, mu: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let terms = poisson_weights(0.5 * mu);
    let s: f64 = terms.iter().map(|&(j, w)| w * gamma_lr(0.5 * f64::from(nu) + j as f64, 0.5 * x)).sum();
    s.clamp(0.0, 1.0)
}

/// Upper tail `1 - noncentral_chisq_cdf(x, nu, mu)` summed directly from the
/// regularized upper incomplete gamma function.
pub fn noncentral_chisq_sf(x: f64, nu: u32, mu: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let terms = poisson_weights(0.5 * mu);
    let s: f64 = terms.iter().map(|&(j, w)| w * gamma_ur(0.5 * f64::from(nu) + j as f64, 0.5 * x)).sum();
    s.clamp(0.0, 1.0)
}

/// Solves `tail(y) = target` for `y > 0` where `tail` is a monotone gamma
/// tail with density `±pdf`, by Newton steps kept inside a bisection bracket.
fn solve_gamma(a: f64, target: f64, lower: bool) -> f64 {
    let tail = |y: f64| if lower { gamma_lr(a, y) } else { gamma_ur(a, y) };
    let pdf = |y: f64| ((a - 1.0) * y.ln() - y - ln_gamma(a)).exp();
    // `g` is increasing in y with root at the solution.
    let g = |y: f64| if lower { tail(y) - target } else { target - tail(y) };
    let (mut lo, mut hi) = (0.0, a.max(1.0));
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..400 {
        let v = g(y);
        if v == 0.0 {
            return y;
        }
        if v < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let d = pdf(y);
        let newton = y - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - y).abs() <= 4.0 * f64::EPSILON * y || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        y = next;
    }
    y
}

/// Central chi-square quantile, `x` with `P(χ²_ν <= x) = p`.
pub fn chisq_quantile(p: f64, nu: u32) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    2.0 * solve_gamma(0.5 * f64::from(nu), p, true)
}

/// Central chi-square upper quantile, `x` with `P(χ²_ν > x) = q`.
pub fn chisq_upper_quantile(q: f64, nu: u32) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * solve_gamma(0.5 * f64::from(nu), q, false)
}

/// A continuous cdf, identified by name and parameters.
///
/// The textual form is the mini-grammar `uniform`, `power(k=2)`,
/// `ztest(N=5)`, `chisq(nu=2,mu=1)`, `chisq_upper(nu=2,mu=1)`,
/// `normal(mean=0,sd=1)` and `survival(<cdf>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Cdf {
    /// `F(t) = t` on `[0, 1]`.
    Uniform,
    /// `F(t) = t^k` on `[0, 1]`.
    Power { k: u32 },
    /// P-value cdf of the two-sided z-test, see [`ztest_alt_cdf`].
    ZTest { n: u32 },
    /// P-value cdf of the equal-tailed two-sided chi-square test under a
    /// noncentral alternative:
    /// `F(t) = F_{ν,μ}(F_{ν,0}^{-1}(t/2)) + 1 - F_{ν,μ}(F_{ν,0}^{-1}(1 - t/2))`.
    ChiSq { nu: u32, mu: f64 },
    /// P-value cdf of the one-sided (upper tail) chi-square test:
    /// `F(t) = 1 - F_{ν,μ}(F_{ν,0}^{-1}(1 - t))`.
    ChiSqUpper { nu: u32, mu: f64 },
    /// Normal cdf on the real line.
    Normal { mean: f64, sd: f64 },
    /// `t -> 1 - G(1 - t)`, the cdf of `1 - X` for `X ~ G` on `[0, 1]`.
    Survival(Box<Cdf>),
}

impl Cdf {
    /// Evaluates the cdf in double precision.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Cdf::Uniform => t.clamp(0.0, 1.0),
            Cdf::Power { k } => t.clamp(0.0, 1.0).powi(*k as i32),
            Cdf::ZTest { n } => ztest_alt_cdf(t, *n),
            Cdf::ChiSq { nu, mu } => {
                if t <= 0.0 {
                    return 0.0;
                }
                if t >= 1.0 {
                    return 1.0;
                }
                let lower_cut = chisq_quantile(0.5 * t, *nu);
                let upper_cut = chisq_upper_quantile(0.5 * t, *nu);
                let v = noncentral_chisq_cdf(lower_cut, *nu, *mu) + noncentral_chisq_sf(upper_cut, *nu, *mu);
                v.clamp(0.0, 1.0)
            }
            Cdf::ChiSqUpper { nu, mu } => {
                if t <= 0.0 {
                    return 0.0;
                }
                if t >= 1.0 {
                    return 1.0;
                }
                noncentral_chisq_sf(chisq_upper_quantile(t, *nu), *nu, *mu)
            }
            Cdf::Normal { mean, sd } => normal_cdf((t - mean) / sd),
            Cdf::Survival(inner) => (1.0 - inner.eval(1.0 - t)).clamp(0.0, 1.0),
        }
    }

    /// Whether [`Cdf::eval_scalar`] is exact in an exact backend, i.e. the
    /// cdf is a rational function of its argument.
    pub fn is_exact(&self) -> bool {
        match self {
            Cdf::Uniform | Cdf::Power { .. } => true,
            Cdf::Survival(inner) => inner.is_exact(),
            _ => false,
        }
    }

    /// Evaluates the cdf in the working scalar. Exact cdfs are computed with
    /// scalar arithmetic; the others are evaluated in double precision and
    /// the resulting double is converted exactly.
    pub fn eval_scalar<S: Scalar>(&self, t: &S) -> S {
        match self {
            Cdf::Uniform => t.clone(),
            Cdf::Power { k } => t.powu(u64::from(*k)),
            Cdf::Survival(inner) if inner.is_exact() => {
                let one = S::one();
                one.sub(&inner.eval_scalar(&one.sub(t)))
            }
            _ => S::from_f64(self.eval(t.to_f64())),
        }
    }

    /// Quantile `inf { t : F(t) >= p }`. Closed forms where available,
    /// otherwise bisection on [`Cdf::eval`].
    pub fn quantile(&self, p: f64) -> Result<f64, Error> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile needs 0 <= p <= 1, got {p}")));
        }
        match self {
            Cdf::Uniform => Ok(p),
            Cdf::Power { k } => Ok(p.powf(1.0 / f64::from(*k))),
            Cdf::Normal { mean, sd } => Ok(mean + sd * normal_quantile(p)?),
            _ => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.eval(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
        }
    }

    /// Whether the cdf lives on `[0, 1]` (p-value cdfs) rather than on the
    /// real line.
    pub fn on_unit_interval(&self) -> bool {
        !matches!(self, Cdf::Normal { .. })
    }
}

impl fmt::Display for Cdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cdf::Uniform => write!(f, "uniform"),
            Cdf::Power { k } => write!(f, "power(k={k})"),
            Cdf::ZTest { n } => write!(f, "ztest(N={n})"),
            Cdf::ChiSq { nu, mu } => write!(f, "chisq(nu={nu},mu={mu})"),
            Cdf::ChiSqUpper { nu, mu } => write!(f, "chisq_upper(nu={nu},mu={mu})"),
            Cdf::Normal { mean, sd } => write!(f, "normal(mean={mean},sd={sd})"),
            Cdf::Survival(inner) => write!(f, "survival({inner})"),
        }
    }
}

impl From<Cdf> for String {
    fn from(c: Cdf) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Cdf {
    type Error = ParseError;
    fn try_from(s: String) -> Result<Self, ParseError> {
        s.parse()
    }
}

struct Params<'a> {
    spec: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(spec: &'a str, body: &'a str) -> Result<Self, ParseError> {
        let mut pairs = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| err(spec, format!("expected key=value, got {item:?}")))?;
            pairs.push((k.trim(), v.trim()));
        }
        Ok(Params { spec, pairs })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<T, ParseError> {
        let pos = self
            .pairs
            .iter()
            .position(|(k, _)| *k == key)
            .ok_or_else(|| err(self.spec, format!("missing parameter {key}")))?;
        let (_, v) = self.pairs.remove(pos);
        v.parse().map_err(|_| err(self.spec, format!("bad value {v:?} for {key}")))
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.pairs.first() {
            Some((k, _)) => Err(err(self.spec, format!("unknown parameter {k}"))),
            None => Ok(()),
        }
    }
}

fn err(spec: &str, reason: impl Into<String>) -> ParseError {
    ParseError::Cdf { spec: spec.to_string(), reason: reason.into() }
}

impl FromStr for Cdf {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let spec = s.trim();
        let (name, body) = match spec.find('(') {
            Some(i) => {
                let body = spec[i + 1..].strip_suffix(')').ok_or_else(|| err(spec, "missing closing parenthesis"))?;
                (spec[..i].trim(), Some(body))
            }
            None => (spec, None),
        };
        if name == "survival" {
            let inner = body.ok_or_else(|| err(spec, "survival needs an inner cdf"))?;
            let inner: Cdf = inner.parse()?;
            if !inner.on_unit_interval() {
                return Err(err(spec, "survival needs a cdf on [0, 1]"));
            }
            return Ok(Cdf::Survival(Box::new(inner)));
        }
        let mut p = Params::parse(spec, body.unwrap_or(""))?;
        let cdf = match name {
            "uniform" => Cdf::Uniform,
            "power" => {
                let k: u32 = p.take("k")?;
                if k == 0 {
                    return Err(err(spec, "k must be at least 1"));
                }
                Cdf::Power { k }
            }
            "ztest" => {
                let n: u32 = p.take("N")?;
                if n == 0 {
                    return Err(err(spec, "N must be at least 1"));
                }
                Cdf::ZTest { n }
            }
            "chisq" | "chisq_upper" => {
                let nu: u32 = p.take("nu")?;
                let mu: f64 = p.take("mu")?;
                if nu == 0 || !(mu >= 0.0 && mu.is_finite()) {
                    return Err(err(spec, "need nu >= 1 and finite mu >= 0"));
                }
                if name == "chisq" {
                    Cdf::ChiSq { nu, mu }
                } else {
                    Cdf::ChiSqUpper { nu, mu }
                }
            }
            "normal" => {
                let mean: f64 = p.take("mean")?;
                let sd: f64 = p.take("sd")?;
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(err(spec, "need finite mean and sd > 0"));
                }
                Cdf::Normal { mean, sd }
            }
            _ => return Err(err(spec, format!("unknown distribution {name:?}"))),
        };
        p.finish()?;
        Ok(cdf)
    }
}

/// Reduces thresholds for `n1` variables with cdf `g1` and `n2` with cdf
/// `g2` to the Uniform-vs-`F` form with `F = g2 ∘ g1^{-1}`: `u_i = g1(b_i)`
/// and `f_i = F(u_i) = g2(b_i)`, so no quantile is needed.
pub fn reduce_to_uniform<S: Scalar>(
    g1: &Cdf,
    g2: &Cdf,
    n1: usize,
    n2: usize,
    b: &[S],
) -> Result<TransformedBoundaries<S>, Error> {
    let u = b.iter().map(|x| g1.eval_scalar(x)).collect();
    let f = b.iter().map(|x| g2.eval_scalar(x)).collect();
    TransformedBoundaries::new(n1, n2, u, f)
}
