//! Joint distribution of order statistics in one- and two-group models.
//!
//! The central quantity is `Ψ(i1, i2)`, the joint cdf of the order statistics
//! of `i1` Uniform[0,1] variables pooled with `i2` independent variables of a
//! continuous cdf `F`, evaluated at nondecreasing thresholds. Three recursions
//! compute it ([`recursions`]), generic over an arithmetic backend
//! ([`scalar`]): doubles, faithfully rounded pair arithmetic ([`pair`]), or
//! exact rationals. [`mtp`] builds the exact joint distribution of false and
//! total rejections of step-up multiple tests on top of it.

pub mod distributions;
pub mod error;
pub mod mtp;
pub mod pair;
pub mod recursions;
pub mod scalar;

pub use distributions::Cdf;
pub use error::{Error, ParseError};
pub use mtp::{JointVR, ModelSpec, MtpOptions, NullCount, StepUpProcedure};
pub use pair::{FaithfulResult, PairNumber};
pub use recursions::{Boundaries, Kernel, PsiTable, TransformedBoundaries};
pub use rug::Rational;
pub use scalar::{OpCounter, Scalar};
