//! `kde-edof` command-line tool.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kde_edof::bandwidth::Rule;
use kde_edof::experiments::{Experiment, Scale};
use kde_edof::sensitivity::Variant;
use kde_edof::KernelFamily;

/// Effective degrees of freedom and bandwidth selection for kernel density estimates.
#[derive(Debug, Parser)]
#[command(name = "kde-edof", version)]
pub struct CliConfig {
    /// Worker threads for the numeric routines (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a KDE and write the density on a grid.
    Fit(FitArgs),
    /// Empirical EDoF measures of a KDE.
    Edof(EdofArgs),
    /// Select a bandwidth with one rule.
    Bandwidth(BandwidthArgs),
    /// Kernel sensitivity matrix and its diagonal profile.
    Sensmat(SensmatArgs),
    /// All-Gaussian mean KL breakdown and optimal bandwidth.
    Amkld(AmkldArgs),
    /// Recurrence coefficients and orthonormality defects of a polynomial basis.
    OpsDiag(OpsDiagArgs),
    /// Regenerate one figure or table as CSV plus a manifest.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Kernel family: gaussian, diffusion or histogram.
    #[arg(long, default_value = "gaussian")]
    pub kernel: KernelFamily,
    /// Support `lo:hi` for diffusion and histogram kernels (default: sample range).
    #[arg(long)]
    pub support: Option<String>,
    /// Equal-width bin count for the histogram kernel.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SmoothingArgs {
    /// Fixed bandwidth.
    #[arg(long, conflicts_with = "rule")]
    pub bandwidth: Option<f64>,
    /// Bandwidth rule when no bandwidth is given.
    #[arg(long)]
    pub rule: Option<Rule>,
    /// AIC penalty per EDoF.
    #[arg(long, default_value_t = 1.5)]
    pub penalty: f64,
    /// Search grid `lo:hi:count` (log-spaced) for grid-based rules.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sample file (one value per line) or `builtin:faithful`.
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Write `y,density` on an evaluation grid to this CSV file.
    #[arg(long)]
    pub grid_out: Option<String>,
    /// Evaluation grid size.
    #[arg(long, default_value_t = 512)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct EdofArgs {
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    #[arg(long)]
    pub input: String,
    /// silverman, scott, ucv, bcv, reglik, amkld or aic.
    #[arg(long)]
    pub rule: Rule,
    #[arg(long, default_value_t = 1.5)]
    pub penalty: f64,
    /// Search grid `lo:hi:count` (log-spaced).
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Write the criterion curve to this CSV file.
    #[arg(long)]
    pub curve_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Sample file or `builtin:faithful` (empirical matrix).
    #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
    pub input: Option<String>,
    /// Oracle density: normal, skewed or bimodal.
    #[arg(long)]
    pub oracle: Option<String>,
}

#[derive(Debug, Args)]
pub struct SensmatArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub bandwidth: f64,
    /// QP, LQ, QL or LL.
    #[arg(long, default_value = "QP")]
    pub variant: Variant,
    #[arg(long, default_value_t = 50)]
    pub max_degree: usize,
    /// Matrix CSV (rows j, columns s0..sD).
    #[arg(long)]
    pub out: Option<String>,
    /// Diagonal profile CSV.
    #[arg(long)]
    pub diag_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct AmkldArgs {
    /// Sample size (defaults to the sample's when --input is given).
    #[arg(long)]
    pub n: Option<usize>,
    /// Scale of the normal density.
    #[arg(long, conflicts_with = "input")]
    pub sigma: Option<f64>,
    /// Estimate σ and n from a sample.
    #[arg(long)]
    pub input: Option<String>,
    /// Also report the breakdown at this bandwidth.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OpsDiagArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 50)]
    pub max_degree: usize,
    /// Recurrence CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<String>,
    /// Full defect matrix CSV.
    #[arg(long)]
    pub defect_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// fig1, fig2, fig3, fig4 or table1.
    pub experiment: Experiment,
    #[arg(long)]
    pub out: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    /// Override the Monte Carlo replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Override the sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
}

fn main() -> ExitCode {
    let cfg = match CliConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cfg.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
