use std::time::Instant;

use ordstat::recursions::{bolshev_one_group, count_operations, psi_table_threaded, CountedKernel};
use ordstat::{Boundaries, Cdf, Kernel, PairNumber, Rational, Scalar, TransformedBoundaries};
use serde::Serialize;

use crate::args::{BackendArg, BenchArgs, BenchKernel, Format};
use crate::common::{decimal, emit, parse_cdf, parse_value, CliResult, Report, SCHEMA_VERSION};

#[derive(Serialize)]
struct Row {
    n1: usize,
    n2: usize,
    kernel: &'static str,
    backend: &'static str,
    threads: usize,
    repeats: u32,
    median_seconds: f64,
    psi: String,
    adds: Option<u64>,
    subs: Option<u64>,
    muls: Option<u64>,
    divs: Option<u64>,
    total_ops: Option<u64>,
}

#[derive(Serialize)]
struct BenchReport {
    schema_version: u32,
    command: &'static str,
    cdf: String,
    alpha: String,
    rows: Vec<Row>,
}

impl Report for BenchReport {
    fn csv(&self) -> String {
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out =
            String::from("n1,n2,kernel,backend,threads,repeats,median_seconds,psi,adds,subs,muls,divs,total_ops\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6e},{},{},{},{},{},{}\n",
                r.n1,
                r.n2,
                r.kernel,
                r.backend,
                r.threads,
                r.repeats,
                r.median_seconds,
                r.psi,
                opt(r.adds),
                opt(r.subs),
                opt(r.muls),
                opt(r.divs),
                opt(r.total_ops),
            ));
        }
        out
    }
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let cdf = parse_cdf(&args.cdf)?;
    let alpha = parse_value("--alpha", &args.alpha)?.value;
    let threads = args.output.threads();
    let mut rows = Vec::new();
    for &l in &args.sizes {
        for &kernel in &args.kernels {
            for &backend in &args.backends {
                if backend == BackendArg::Pair && kernel != BenchKernel::Noe {
                    eprintln!(
                        "skipping {} on the {} backend: it subtracts computed intermediates",
                        kernel.name(),
                        backend.name()
                    );
                    continue;
                }
                let row = match backend {
                    BackendArg::Double => cell::<f64>(args, l, kernel, &cdf, &alpha, threads)?,
                    BackendArg::Pair => cell::<PairNumber>(args, l, kernel, &cdf, &alpha, threads)?,
                    BackendArg::Rational => cell::<Rational>(args, l, kernel, &cdf, &alpha, threads)?,
                };
                eprintln!("{} {} l={l}: {:.3e} s", row.kernel, row.backend, row.median_seconds);
                rows.push(row);
            }
        }
    }
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench",
        cdf: cdf.to_string(),
        alpha: crate::common::fraction(&alpha),
        rows,
    };
    emit(&report, &args.output, Format::Csv)
}

/// Thresholds `b_i = i α / n` and `f_i = F(b_i)`.
pub fn grid<S: Scalar>(n1: usize, n2: usize, cdf: &Cdf, alpha: &Rational) -> CliResult<TransformedBoundaries<S>> {
    let n = (n1 + n2).max(1);
    let b: Vec<S> = (1..=n1 + n2).map(|i| S::from_rational(&(Rational::from(alpha * i as u64) / n as u64))).collect();
    Ok(TransformedBoundaries::with_cdf(n1, n2, Boundaries::new(b)?, |x| cdf.eval_scalar(x))?)
}

fn cell<S: Scalar>(
    args: &BenchArgs,
    l: usize,
    kernel: BenchKernel,
    cdf: &Cdf,
    alpha: &Rational,
    threads: usize,
) -> CliResult<Row> {
    let (n1, n2) = if kernel == BenchKernel::Bolshev1 { (l, 0) } else { (l, l) };
    let tb = grid::<S>(n1, n2, cdf, alpha)?;
    let run_once = || -> CliResult<S> {
        Ok(match kernel {
            BenchKernel::Bolshev1 => bolshev_one_group(&Boundaries::new(tb.u().to_vec())?)?,
            BenchKernel::Bolshev => psi_table_threaded(Kernel::Bolshev, &tb, threads)?.full().clone(),
            BenchKernel::Steck => psi_table_threaded(Kernel::Steck, &tb, threads)?.full().clone(),
            BenchKernel::Noe => psi_table_threaded(Kernel::Noe, &tb, threads)?.full().clone(),
        })
    };
    let mut times = Vec::with_capacity(args.repeats as usize);
    let mut value = S::zero();
    for _ in 0..args.repeats {
        let start = Instant::now();
        value = run_once()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];

    let ops = if args.skip_ops {
        None
    } else {
        let counted = match kernel {
            BenchKernel::Bolshev1 => CountedKernel::BolshevOneGroup,
            BenchKernel::Bolshev => CountedKernel::TwoGroup(Kernel::Bolshev),
            BenchKernel::Steck => CountedKernel::TwoGroup(Kernel::Steck),
            BenchKernel::Noe => CountedKernel::TwoGroup(Kernel::Noe),
        };
        Some(count_operations(counted, &tb)?)
    };
    Ok(Row {
        n1,
        n2,
        kernel: kernel.name(),
        backend: S::NAME,
        threads,
        repeats: args.repeats,
        median_seconds: median,
        psi: decimal(value.to_f64()),
        adds: ops.map(|o| o.adds),
        subs: ops.map(|o| o.subs),
        muls: ops.map(|o| o.muls),
        divs: ops.map(|o| o.divs),
        total_ops: ops.map(|o| o.total()),
    })
}
