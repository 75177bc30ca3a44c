use ordstat::distributions::reduce_to_uniform;
use ordstat::pair::{k_parameter, K_LIMIT};
use ordstat::recursions::{count_operations, psi_table_threaded, CountedKernel};
use ordstat::scalar::adjacent_doubles;
use ordstat::{Kernel, OpCounter, PairNumber, PsiTable, Rational, Scalar};
use serde::Serialize;

use crate::args::{BackendArg, Format, PsiArgs};
use crate::common::{
    check_exactness, decimal, emit, parse_cdf, parse_value, read_values, warn, Backend, CliError, CliResult,
    InputValue, Report, SCHEMA_VERSION,
};

/// Largest group size for which `k(n1, n2)` stays within the certified limit.
pub const CERTIFICATION_BOUNDARY: u64 = 8184;

/// Relative accuracy assumed for each threshold difference when cdf values
/// are only available in double precision.
const ENCLOSURE_EPSILON_LOG2: u32 = 50;

#[derive(Serialize)]
struct PairMeta {
    k_used: u64,
    k_limit: u64,
    certification_boundary: u64,
    underflow_flag: bool,
    overflow_flag: bool,
    certified: bool,
}

#[derive(Serialize)]
struct Enclosure {
    epsilon: String,
    lower: Vec<Vec<String>>,
    upper: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct PsiReport {
    schema_version: u32,
    command: &'static str,
    n1: usize,
    n2: usize,
    backend: &'static str,
    kernel: Kernel,
    g1: String,
    cdf: String,
    threads: usize,
    thresholds: Vec<String>,
    psi: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_exact: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<PairMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enclosure: Option<Enclosure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    op_counts: Option<OpCounter>,
    warnings: Vec<String>,
}

impl Report for PsiReport {
    fn csv(&self) -> String {
        let mut header = String::from("i1,i2,psi");
        if self.psi_exact.is_some() {
            header.push_str(",exact");
        }
        if self.enclosure.is_some() {
            header.push_str(",lower,upper");
        }
        let mut out = header + "\n";
        for (i1, row) in self.psi.iter().enumerate() {
            for (i2, v) in row.iter().enumerate() {
                out.push_str(&format!("{i1},{i2},{v}"));
                if let Some(ex) = &self.psi_exact {
                    out.push_str(&format!(",{}", ex[i1][i2]));
                }
                if let Some(enc) = &self.enclosure {
                    out.push_str(&format!(",{},{}", enc.lower[i1][i2], enc.upper[i1][i2]));
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn run(args: &PsiArgs) -> CliResult<()> {
    match args.backend {
        BackendArg::Double => run_with::<f64>(args),
        BackendArg::Pair => run_with::<PairNumber>(args),
        BackendArg::Rational => run_with::<Rational>(args),
    }
}

fn thresholds(args: &PsiArgs) -> CliResult<Vec<InputValue>> {
    let n = args.n1 + args.n2;
    let values = if let Some(path) = &args.thresholds {
        read_values(path)?
    } else if let Some(bh) = &args.bh {
        let m: usize = bh[0].parse().map_err(|_| CliError::Usage(format!("--bh: bad count {:?}", bh[0])))?;
        let alpha = parse_value("--bh alpha", &bh[1])?.value;
        (1..=m)
            .map(|i| {
                let value = Rational::from(&alpha * i as u64) / m as u64;
                InputValue { text: crate::common::fraction(&value), value }
            })
            .collect()
    } else if n == 0 {
        Vec::new()
    } else {
        return Err(CliError::Usage("thresholds are required: pass --thresholds FILE or --bh M ALPHA".into()));
    };
    if values.len() != n {
        return Err(CliError::Usage(format!("{} thresholds given for n1 + n2 = {n}", values.len())));
    }
    Ok(values)
}

fn run_with<S: Backend>(args: &PsiArgs) -> CliResult<()> {
    let g1 = parse_cdf(&args.g1)?;
    let g2 = parse_cdf(&args.cdf)?;
    let is_rational = S::NAME == "rational";
    let exact_inputs = check_exactness(is_rational, args.enclosure, &[&g1, &g2])?;
    let values = thresholds(args)?;
    let b: Vec<S> = values.iter().map(|v| S::from_rational(&v.value)).collect();
    let tb = reduce_to_uniform(&g1, &g2, args.n1, args.n2, &b)?;
    let kernel: Kernel = args.kernel.into();
    let threads = args.output.threads();
    let psi: PsiTable<S> = psi_table_threaded(kernel, &tb, threads)?;

    let rows = psi.rows();
    let table: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| decimal(x.to_f64())).collect()).collect();
    let psi_exact: Option<Vec<Vec<String>>> =
        rows.iter().map(|r| r.iter().map(|x| x.exact()).collect::<Option<Vec<_>>>()).collect();

    let mut warnings = Vec::new();
    for (i1, r) in rows.iter().enumerate() {
        for (i2, x) in r.iter().enumerate() {
            let v = x.to_f64();
            if !(0.0..=1.0).contains(&v) {
                warn(
                    &mut warnings,
                    format!(
                        "Ψ({i1},{i2}) = {} lies outside [0, 1]: the {kernel} kernel lost accuracy to cancellation \
                         on the {} backend; use --backend pair --kernel noe or --backend rational",
                        decimal(v),
                        S::NAME
                    ),
                );
            }
        }
    }

    let pair = (S::NAME == "pair").then(|| {
        let (mut underflow, mut overflow) = (false, false);
        for x in rows.iter().flat_map(|r| r.iter()) {
            let (u, o) = x.flags();
            underflow |= u;
            overflow |= o;
        }
        let n = (args.n1 + args.n2) as u64;
        let k_used = if n >= 2 { k_parameter(args.n1 as u64, args.n2 as u64).unwrap_or(0) } else { 0 };
        PairMeta {
            k_used,
            k_limit: K_LIMIT,
            certification_boundary: CERTIFICATION_BOUNDARY,
            underflow_flag: underflow,
            overflow_flag: overflow,
            certified: !underflow && !overflow && k_used <= K_LIMIT,
        }
    });
    if let Some(meta) = &pair {
        if meta.underflow_flag {
            warn(&mut warnings, "underflow occurred: entries may be smaller than the exact values".into());
        }
    }

    let enclosure = (is_rational && !exact_inputs).then(|| enclosure(&psi));
    let op_counts = if args.count_ops { Some(count_operations(CountedKernel::TwoGroup(kernel), &tb)?) } else { None };

    let certified = match (&pair, is_rational) {
        (Some(meta), _) => meta.certified,
        (None, true) => exact_inputs,
        (None, false) => false,
    };

    let report = PsiReport {
        schema_version: SCHEMA_VERSION,
        command: "psi",
        n1: args.n1,
        n2: args.n2,
        backend: S::NAME,
        kernel,
        g1: g1.to_string(),
        cdf: g2.to_string(),
        threads,
        thresholds: values.into_iter().map(|v| v.text).collect(),
        psi: table,
        psi_exact,
        pair,
        enclosure,
        op_counts,
        warnings,
    };
    emit(&report, &args.output, Format::Json)?;

    if args.require_faithful && !certified {
        return Err(CliError::Certification(format!(
            "the result is not certified: {}",
            match S::NAME {
                "pair" => "underflow/overflow occurred or k exceeds its limit",
                "rational" => "cdf values were only available in double precision",
                _ => "the double backend gives no accuracy guarantee",
            }
        )));
    }
    Ok(())
}

/// `Ψ (1 - 2ε)^(i1+i2) <= Ψ~ <= Ψ (1 + 2ε)^(i1+i2)` with `ε = 2^-50`,
/// rounded outwards to doubles.
fn enclosure<S: Backend>(psi: &PsiTable<S>) -> Enclosure {
    let two_eps = Rational::from((1u32, 1u64 << (ENCLOSURE_EPSILON_LOG2 - 1)));
    let down = Rational::from(1 - &two_eps);
    let up = Rational::from(1 + &two_eps);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i1, row) in psi.rows().iter().enumerate() {
        let (mut lo_row, mut hi_row) = (Vec::new(), Vec::new());
        for (i2, x) in row.iter().enumerate() {
            let v = x.as_rational().unwrap_or_default();
            let e = (i1 + i2) as u64;
            let lo = Rational::from(&v * &down.powu(e));
            let hi = Rational::from(&v * &up.powu(e));
            lo_row.push(decimal(adjacent_doubles(&lo).0));
            hi_row.push(decimal(adjacent_doubles(&hi).1));
        }
        lower.push(lo_row);
        upper.push(hi_row);
    }
    Enclosure { epsilon: format!("2^-{ENCLOSURE_EPSILON_LOG2}"), lower, upper }
}
