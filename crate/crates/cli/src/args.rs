use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordstat::Kernel;

#[derive(Parser, Debug)]
#[command(
    name = "ordstat",
    version,
    about = "Joint distribution of order statistics and exact step-up test statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Table of Ψ(i1, i2) for a two-group model.
    Psi(PsiArgs),
    /// Joint distribution of false and total rejections of a step-up test,
    /// with FDR, FDP distribution and power.
    JointVr(MtpArgs),
    /// Average power and λ-power of a step-up test.
    Power(MtpArgs),
    /// Distribution of the false discovery proportion of a step-up test.
    FdpDist(MtpArgs),
    /// Timing and operation-count table over a grid of sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Double,
    Pair,
    Rational,
}

impl BackendArg {
    pub fn name(self) -> &'static str {
        match self {
            BackendArg::Double => "double",
            BackendArg::Pair => "pair",
            BackendArg::Rational => "rational",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Bolshev,
    Steck,
    Noe,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Kernel {
        match k {
            KernelArg::Bolshev => Kernel::Bolshev,
            KernelArg::Steck => Kernel::Steck,
            KernelArg::Noe => Kernel::Noe,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output format [default: json; csv for bench].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the Noe kernel [default: available parallelism].
    #[arg(long, env = "ORDSTAT_THREADS")]
    pub threads: Option<usize>,
}

impl OutputArgs {
    pub fn threads(&self) -> usize {
        self.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
    }
}

#[derive(Args, Debug)]
pub struct PsiArgs {
    /// Number of variables in the first (uniform after reduction) group.
    #[arg(long, default_value_t = 0)]
    pub n1: usize,
    /// Number of variables in the second group.
    #[arg(long, default_value_t = 0)]
    pub n2: usize,
    /// Threshold file: one decimal or p/q fraction per line, `#` comments.
    #[arg(long, conflicts_with = "bh")]
    pub thresholds: Option<PathBuf>,
    /// Generate thresholds b_i = i * ALPHA / M.
    #[arg(long, num_args = 2, value_names = ["M", "ALPHA"])]
    pub bh: Option<Vec<String>>,
    /// Cdf of the first group.
    #[arg(long, default_value = "uniform")]
    pub g1: String,
    /// Cdf of the second group.
    #[arg(long, default_value = "uniform")]
    pub cdf: String,
    #[arg(long, value_enum, default_value_t = BackendArg::Pair)]
    pub backend: BackendArg,
    #[arg(long, value_enum, default_value_t = KernelArg::Noe)]
    pub kernel: KernelArg,
    /// Also report the arithmetic operations the kernel performs.
    #[arg(long)]
    pub count_ops: bool,
    /// Exit with status 3 unless every entry is certified faithful (pair)
    /// or exact (rational).
    #[arg(long)]
    pub require_faithful: bool,
    /// With the rational backend, accept cdfs that are only available in
    /// double precision and report an enclosure of Ψ.
    #[arg(long)]
    pub enclosure: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Fixed number m0 of true null hypotheses.
    Fm,
    /// Each hypothesis is a true null with probability pi0.
    Rm,
}

#[derive(Args, Debug)]
pub struct MtpArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Number of hypotheses.
    #[arg(long)]
    pub m: usize,
    /// Number of true null hypotheses (fm).
    #[arg(long)]
    pub m0: Option<usize>,
    /// Probability that a hypothesis is a true null (rm).
    #[arg(long)]
    pub pi0: Option<String>,
    /// Cdf of the p-values of false hypotheses.
    #[arg(long, default_value = "uniform")]
    pub cdf: String,
    /// Benjamini-Hochberg critical values t_i = i * ALPHA / m.
    #[arg(long, conflicts_with = "thresholds", required_unless_present = "thresholds")]
    pub alpha: Option<String>,
    /// Critical-value file: one decimal or p/q fraction per line.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Also report P((R - V)/(m - M0) >= LAMBDA).
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long, value_enum, default_value_t = BackendArg::Pair)]
    pub backend: BackendArg,
    #[arg(long, value_enum, default_value_t = KernelArg::Noe)]
    pub kernel: KernelArg,
    /// With the rational backend, accept cdfs that are only available in
    /// double precision (their double values are used exactly).
    #[arg(long)]
    pub enclosure: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchKernel {
    /// One-group Bolshev recursion on n1 variables.
    Bolshev1,
    Bolshev,
    Steck,
    Noe,
}

impl BenchKernel {
    pub fn name(self) -> &'static str {
        match self {
            BenchKernel::Bolshev1 => "bolshev1",
            BenchKernel::Bolshev => "bolshev",
            BenchKernel::Steck => "steck",
            BenchKernel::Noe => "noe",
        }
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Group sizes l; two-group kernels run with n1 = n2 = l, bolshev1 with n1 = l.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    pub sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "noe")]
    pub kernels: Vec<BenchKernel>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pair")]
    pub backends: Vec<BackendArg>,
    /// Timed runs per cell; the median is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..))]
    pub repeats: u32,
    /// Thresholds are b_i = i * ALPHA / n.
    #[arg(long, default_value = "0.05")]
    pub alpha: String,
    /// Cdf of the second group.
    #[arg(long, default_value = "power(k=2)")]
    pub cdf: String,
    /// Skip the (untimed) instrumented run that counts operations.
    #[arg(long)]
    pub skip_ops: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}
