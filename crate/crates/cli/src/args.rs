use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsjd::european::OptionKind;

#[derive(Debug, Parser)]
#[command(name = "rsjd", version, about = "Regime-switching jump-diffusion pricer. Writes CSV to standard output.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(flatten)]
    Price(Pricing),
    /// Wiener-Hopf factors, residuals and optional passage probabilities.
    Whdump(WhdumpArgs),
    /// Regime-switching approximations of stochastic-volatility targets.
    #[command(subcommand)]
    Approx(ApproxCommand),
    /// Monte-Carlo mirror of the pricing subcommands.
    Mc(McArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON model file.
    #[arg(long)]
    pub model: PathBuf,
    /// JSON settings overlay; any subset of the numerical settings.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Override one setting, for example `--set fourier_tol=1e-10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Call,
    Put,
}

impl From<Kind> for OptionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Call => OptionKind::Call,
            Kind::Put => OptionKind::Put,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Quadrature,
    Fd,
    Laplace,
    All,
}

/// Subcommands that have a Monte-Carlo mirror. Barrier levels are in price units.
#[derive(Debug, Clone, Subcommand)]
pub enum Pricing {
    /// European call or put prices.
    Vanilla {
        #[command(flatten)]
        model: ModelArgs,
        /// Strikes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        strike: Vec<f64>,
        #[arg(long)]
        maturity: f64,
        #[arg(long, value_enum, default_value = "call")]
        kind: Kind,
    },
    /// Forward-start calls paying (S_t2 - kappa S_t1)+ at t2.
    Fwdstart {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        kappa: Vec<f64>,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
    },
    /// Forward smile at t1 given log-price y at t1.
    Smile {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        kappa: Vec<f64>,
    },
    /// Variance swap rate.
    Varswap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        maturity: f64,
        #[arg(long, value_enum, default_value = "quadrature")]
        method: Method,
    },
    /// Volatility swap rate.
    Volswap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        maturity: f64,
    },
    /// Double-no-touch paying 1 at maturity.
    Dnt {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        #[arg(long)]
        maturity: f64,
    },
    /// Double knock-out calls or puts, with the knock-in and vanilla prices.
    Dkoc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        strike: Vec<f64>,
        #[arg(long)]
        maturity: f64,
        #[arg(long, value_enum, default_value = "call")]
        kind: Kind,
    },
    /// Rebate paid at the first exit from the corridor before maturity.
    Rebate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        #[arg(long)]
        maturity: f64,
        #[arg(long, default_value_t = 1.0)]
        amount: f64,
    },
    /// Joint density of the log-price and the regime at maturity.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        maturity: f64,
        /// Log-price points, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y: Vec<f64>,
    },
}

impl Pricing {
    pub fn model_args(&self) -> &ModelArgs {
        match self {
            Pricing::Vanilla { model, .. }
            | Pricing::Fwdstart { model, .. }
            | Pricing::Smile { model, .. }
            | Pricing::Varswap { model, .. }
            | Pricing::Volswap { model, .. }
            | Pricing::Dnt { model, .. }
            | Pricing::Dkoc { model, .. }
            | Pricing::Rebate { model, .. }
            | Pricing::Density { model, .. } => model,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WhdumpArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Killing rate, real or complex such as `10+5i`.
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
    /// Levels a for P(sup X - X0 > a before an exponential time of rate q).
    #[arg(long, value_delimiter = ',')]
    pub level: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(subcommand)]
    pub what: McTarget,
    #[arg(long, global = true, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Also run the analytic pricer and report the z-score.
    #[arg(long, global = true)]
    pub check: bool,
    /// Bin width in log-price for conditional and density estimates.
    #[arg(long, global = true, default_value_t = 0.02)]
    pub window: f64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum McTarget {
    #[command(flatten)]
    Price(Pricing),
    /// Passage probabilities of the whdump subcommand (real q, at least one level).
    Whdump(WhdumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Cir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Int,
    Tc,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub theta: f64,
    /// Volatility of variance.
    #[arg(long)]
    pub eps: f64,
    /// Initial variance; defaults to theta.
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long, value_enum)]
    pub flavor: FlavorArg,
    /// Base diffusion coefficient multiplied by the square root of the variance level.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Probability that a base jump is upward.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long)]
    pub eta_plus: Option<f64>,
    #[arg(long)]
    pub eta_minus: Option<f64>,
    /// Take sigma, lambda and the jump law from regime 0 of this model file instead.
    #[arg(long, conflicts_with_all = ["sigma", "lambda", "p", "eta_plus", "eta_minus"])]
    pub base: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub rd: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rf: f64,
    /// Initial log-price.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long)]
    pub v_min: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum ApproxCommand {
    /// Write the approximating model file to standard output.
    Build {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        levels: usize,
    },
    /// Vanilla prices across grid sizes with successive differences.
    Report {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        strike: Vec<f64>,
        #[arg(long)]
        maturity: f64,
        #[arg(long, value_enum, default_value = "call")]
        kind: Kind,
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}
