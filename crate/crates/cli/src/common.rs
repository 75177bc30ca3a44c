use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use ordstat::scalar::parse_number;
use ordstat::{Cdf, PairNumber, Rational, Scalar};
use serde::Serialize;
use thiserror::Error;

use crate::args::{Format, OutputArgs};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or inputs that violate a documented invariant.
    #[error("{0}")]
    Usage(String),
    /// The result could not be certified (`--require-faithful`).
    #[error("{0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Certification(_) => ExitCode::from(3),
        }
    }
}

impl From<ordstat::Error> for CliError {
    fn from(e: ordstat::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ordstat::ParseError> for CliError {
    fn from(e: ordstat::ParseError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reporting hooks for the three backends.
pub trait Backend: Scalar {
    /// The exact value, for exact backends.
    fn as_rational(&self) -> Option<Rational> {
        None
    }
    /// `"p/q"` for exact values.
    fn exact(&self) -> Option<String> {
        self.as_rational().map(|r| fraction(&r))
    }
    /// Sticky underflow and overflow flags.
    fn flags(&self) -> (bool, bool) {
        (false, false)
    }
}

impl Backend for f64 {}

impl Backend for PairNumber {
    fn flags(&self) -> (bool, bool) {
        (self.underflow(), self.overflow())
    }
}

impl Backend for Rational {
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

pub fn fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Shortest decimal string that parses back to the same double.
pub fn decimal(x: f64) -> String {
    format!("{x:?}")
}

/// A number given on the command line or in a file, kept with its text.
#[derive(Debug, Clone)]
pub struct InputValue {
    pub text: String,
    pub value: Rational,
}

pub fn parse_value(what: &str, text: &str) -> CliResult<InputValue> {
    let value = parse_number(text.trim()).map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
    Ok(InputValue { text: text.trim().to_string(), value })
}

/// Reads one number per line; `#` starts a comment, blank lines are skipped.
pub fn read_values(path: &Path) -> CliResult<Vec<InputValue>> {
    let content =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, line) in content.lines().enumerate() {
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        out.push(parse_value(&format!("{}:{}", path.display(), no + 1), text)?);
    }
    Ok(out)
}

pub fn parse_cdf(text: &str) -> CliResult<Cdf> {
    Ok(text.parse::<Cdf>()?)
}

/// Rational backends need exactly computable cdfs unless the caller accepts
/// double-precision cdf values.
pub fn check_exactness(backend_is_rational: bool, enclosure: bool, cdfs: &[&Cdf]) -> CliResult<bool> {
    let exact = cdfs.iter().all(|c| c.is_exact());
    if backend_is_rational && !exact && !enclosure {
        let names: Vec<String> = cdfs.iter().filter(|c| !c.is_exact()).map(|c| c.to_string()).collect();
        return Err(CliError::Usage(format!(
            "the rational backend needs exactly computable cdfs; {} is only available in double precision \
             (pass --enclosure to use its double values)",
            names.join(", ")
        )));
    }
    Ok(exact)
}

/// A report that can be written as JSON or CSV.
pub trait Report: Serialize {
    fn csv(&self) -> String;
}

pub fn emit<R: Report>(report: &R, output: &OutputArgs, default: Format) -> CliResult<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => report.csv(),
    };
    match &output.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
        }
    }
}

pub fn warn(warnings: &mut Vec<String>, message: String) {
    eprintln!("warning: {message}");
    warnings.push(message);
}
