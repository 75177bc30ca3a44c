use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed number: {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("malformed distribution spec {spec:?}: {reason}")]
    Cdf { spec: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid boundaries: {0}")]
    Boundaries(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("the {kernel} kernel subtracts computed intermediates and cannot run on the {backend} backend")]
    UnsupportedBackend { kernel: &'static str, backend: &'static str },
    #[error("invalid model: {0}")]
    Model(String),
}
