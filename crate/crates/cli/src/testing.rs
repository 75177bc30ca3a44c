use ordstat::mtp::{
    avg_power, avg_power_given, bh_thresholds, fdp_distribution, fdr, joint_vr, lambda_power, lambda_power_given,
};
use ordstat::scalar::rational_to_nearest_f64;
use ordstat::{Cdf, JointVR, Kernel, ModelSpec, MtpOptions, PairNumber, Rational, StepUpProcedure};
use serde::Serialize;

use crate::args::{BackendArg, Format, ModelArg, MtpArgs};
use crate::common::{
    check_exactness, decimal, emit, fraction, parse_cdf, parse_value, read_values, warn, Backend, CliError, CliResult,
    Report, SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtpCommand {
    JointVr,
    Power,
    FdpDist,
}

impl MtpCommand {
    fn name(self) -> &'static str {
        match self {
            MtpCommand::JointVr => "joint-vr",
            MtpCommand::Power => "power",
            MtpCommand::FdpDist => "fdp-dist",
        }
    }
}

/// A probability as a shortest round-trip decimal, plus `"p/q"` when exact.
#[derive(Serialize)]
struct Num {
    decimal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
}

impl Num {
    fn of<S: Backend>(x: &S) -> Num {
        Num { decimal: decimal(x.to_f64()), exact: x.exact() }
    }
}

#[derive(Serialize)]
struct Cell {
    j: usize,
    k: usize,
    p: Num,
}

#[derive(Serialize)]
struct Atom {
    fdp: String,
    fdp_decimal: String,
    mass: Num,
}

#[derive(Serialize)]
struct PowerRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    m0: Option<usize>,
    avg_power: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_power: Option<Num>,
}

#[derive(Serialize)]
struct MtpReport {
    schema_version: u32,
    command: &'static str,
    model: &'static str,
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi0: Option<String>,
    cdf: String,
    backend: &'static str,
    kernel: Kernel,
    threads: usize,
    thresholds: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Cell>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejections: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fdr: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fdp_distribution: Option<Vec<Atom>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power: Option<Vec<PowerRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    underflow_flag: Option<bool>,
    warnings: Vec<String>,
}

impl Report for MtpReport {
    fn csv(&self) -> String {
        let with_exact = |n: &Num| match &n.exact {
            Some(e) => format!("{},{e}", n.decimal),
            None => n.decimal.clone(),
        };
        let exact_cols = self.backend == "rational";
        let mut out = String::new();
        if let Some(table) = &self.table {
            out.push_str(if exact_cols { "j,k,p,p_exact\n" } else { "j,k,p\n" });
            for c in table {
                out.push_str(&format!("{},{},{}\n", c.j, c.k, with_exact(&c.p)));
            }
        } else if let Some(atoms) = &self.fdp_distribution {
            out.push_str(if exact_cols { "fdp,fdp_decimal,mass,mass_exact\n" } else { "fdp,fdp_decimal,mass\n" });
            for a in atoms {
                out.push_str(&format!("{},{},{}\n", a.fdp, a.fdp_decimal, with_exact(&a.mass)));
            }
        } else if let Some(rows) = &self.power {
            let mut header = String::from("m0,avg_power");
            if exact_cols {
                header.push_str(",avg_power_exact");
            }
            if self.lambda.is_some() {
                header.push_str(",lambda_power");
                if exact_cols {
                    header.push_str(",lambda_power_exact");
                }
            }
            out.push_str(&header);
            out.push('\n');
            for r in rows {
                let m0 = r.m0.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{m0},{}", with_exact(&r.avg_power)));
                if let Some(l) = &r.lambda_power {
                    out.push_str(&format!(",{}", with_exact(l)));
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn run(cmd: MtpCommand, args: &MtpArgs) -> CliResult<()> {
    match args.backend {
        BackendArg::Double => run_with::<f64>(cmd, args),
        BackendArg::Pair => run_with::<PairNumber>(cmd, args),
        BackendArg::Rational => run_with::<Rational>(cmd, args),
    }
}

fn procedure<S: Backend>(args: &MtpArgs) -> CliResult<(StepUpProcedure<S>, Vec<String>)> {
    if let Some(alpha) = &args.alpha {
        let alpha = parse_value("--alpha", alpha)?.value;
        let proc = bh_thresholds::<S>(args.m, &alpha)?;
        let texts = (1..=args.m).map(|i| fraction(&(Rational::from(&alpha * i as u64) / args.m as u64))).collect();
        return Ok((proc, texts));
    }
    let path = args.thresholds.as_ref().ok_or_else(|| CliError::Usage("pass --alpha or --thresholds".into()))?;
    let values = read_values(path)?;
    if values.len() != args.m {
        return Err(CliError::Usage(format!("{} critical values given for m = {}", values.len(), args.m)));
    }
    let proc = StepUpProcedure::new(values.iter().map(|v| S::from_rational(&v.value)).collect())?;
    Ok((proc, values.into_iter().map(|v| v.text).collect()))
}

fn run_with<S: Backend>(cmd: MtpCommand, args: &MtpArgs) -> CliResult<()> {
    let cdf: Cdf = parse_cdf(&args.cdf)?;
    check_exactness(S::NAME == "rational", args.enclosure, &[&cdf])?;
    let (proc, thresholds) = procedure::<S>(args)?;
    let opts = MtpOptions { kernel: args.kernel.into(), threads: args.output.threads() };
    let lambda = args.lambda.as_ref().map(|l| parse_value("--lambda", l).map(|v| v.value)).transpose()?;
    if let Some(l) = &lambda {
        if !(*l > 0 && *l <= 1) {
            return Err(CliError::Usage(format!("--lambda must lie in (0, 1], got {}", fraction(l))));
        }
    }

    let (model, pi0_text) = match args.model {
        ModelArg::Fm => {
            if args.pi0.is_some() {
                return Err(CliError::Usage("--pi0 belongs to --model rm; use --m0 with --model fm".into()));
            }
            let m0 = match (args.m0, cmd) {
                (Some(m0), _) => Some(m0),
                (None, MtpCommand::Power) => None,
                (None, _) => return Err(CliError::Usage("--model fm needs --m0".into())),
            };
            (m0.map(|m0| ModelSpec::<S>::fm(args.m, m0, cdf.clone())).transpose()?, None)
        }
        ModelArg::Rm => {
            if args.m0.is_some() {
                return Err(CliError::Usage("--m0 belongs to --model fm; use --pi0 with --model rm".into()));
            }
            let text = args.pi0.as_ref().ok_or_else(|| CliError::Usage("--model rm needs --pi0".into()))?;
            let pi0 = S::from_rational(&parse_value("--pi0", text)?.value);
            (Some(ModelSpec::rm(args.m, pi0, cdf.clone())?), Some(text.clone()))
        }
    };
    let mut warnings = Vec::new();
    let mut report = MtpReport {
        schema_version: SCHEMA_VERSION,
        command: cmd.name(),
        model: match args.model {
            ModelArg::Fm => "fm",
            ModelArg::Rm => "rm",
        },
        m: args.m,
        m0: args.m0,
        pi0: pi0_text,
        cdf: cdf.to_string(),
        backend: S::NAME,
        kernel: opts.kernel,
        threads: opts.threads,
        thresholds,
        table: None,
        rejections: None,
        sum: None,
        fdr: None,
        fdp_distribution: None,
        lambda: lambda.as_ref().map(fraction),
        power: None,
        underflow_flag: None,
        warnings: Vec::new(),
    };

    let vr: Option<JointVR<S>> = match &model {
        Some(model) if cmd != MtpCommand::Power || args.m0.is_some() => Some(joint_vr(model, &proc, opts)?),
        _ => None,
    };
    if let Some(vr) = &vr {
        check_table(vr, &mut warnings);
        if S::NAME == "pair" {
            report.underflow_flag = Some(vr.cells().any(|(_, _, p)| p.flags().0));
        }
        report.fdr = Some(Num::of(&fdr(vr)));
        report.sum = Some(Num::of(&vr.total()));
        if cmd != MtpCommand::Power {
            report.fdp_distribution = Some(
                fdp_distribution(vr)
                    .iter()
                    .map(|(v, p)| Atom {
                        fdp: fraction(v),
                        fdp_decimal: decimal(rational_to_nearest_f64(v)),
                        mass: Num::of(p),
                    })
                    .collect(),
            );
        }
        if cmd == MtpCommand::JointVr {
            report.table = Some(vr.cells().map(|(j, k, p)| Cell { j, k, p: Num::of(p) }).collect());
            report.rejections = Some(vr.rejections().iter().map(Num::of).collect());
        }
    }

    if cmd != MtpCommand::FdpDist {
        report.power = Some(match (&model, &vr) {
            (Some(model), _) if args.m0.is_none() => {
                // Random model: mixture over the null count.
                vec![PowerRow {
                    m0: None,
                    avg_power: Num::of(&avg_power(model, &proc, opts)?),
                    lambda_power: lambda
                        .as_ref()
                        .map(|l| lambda_power(model, &proc, l, opts).map(|v| Num::of(&v)))
                        .transpose()?,
                }]
            }
            (Some(_), Some(vr)) => {
                let m0 = args.m0.expect("fixed model");
                vec![PowerRow {
                    m0: Some(m0),
                    avg_power: Num::of(&avg_power_given(vr, m0)),
                    lambda_power: lambda.as_ref().map(|l| Num::of(&lambda_power_given(vr, m0, l))),
                }]
            }
            _ => {
                let mut rows = Vec::new();
                for m0 in 0..=args.m {
                    let fm = ModelSpec::<S>::fm(args.m, m0, cdf.clone())?;
                    let vr = joint_vr(&fm, &proc, opts)?;
                    rows.push(PowerRow {
                        m0: Some(m0),
                        avg_power: Num::of(&avg_power_given(&vr, m0)),
                        lambda_power: lambda.as_ref().map(|l| Num::of(&lambda_power_given(&vr, m0, l))),
                    });
                }
                rows
            }
        });
    }
    report.warnings = warnings;
    emit(&report, &args.output, Format::Json)
}

fn check_table<S: Backend>(vr: &JointVR<S>, warnings: &mut Vec<String>) {
    for (j, k, p) in vr.cells() {
        if p.to_f64() < 0.0 {
            warn(warnings, format!("P(V={j}, R={k}) = {} is negative", decimal(p.to_f64())));
        }
    }
    if S::NAME != "rational" {
        let total = vr.total().to_f64();
        if (total - 1.0).abs() > 1e-12 {
            warn(warnings, format!("the table sums to {} instead of 1", decimal(total)));
        }
    }
}
