//! Command-line runner for the spectral predictions and their Monte Carlo
//! validation experiments.
//!
//! Every subcommand resolves its configuration from defaults, an optional
//! JSON file, and flags (in that precedence order), runs one experiment,
//! prints a pass/fail summary, and optionally writes `report.json` plus CSV
//! plot data into `--out-dir`.  Exit codes: 0 all checks passed, 1 a check
//! failed or a runtime error occurred, 2 the configuration was invalid.

mod config;
mod experiments;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Overrides};
use experiments::ExpContext;

#[derive(Parser)]
#[command(
    name = "randnet",
    version,
    about = "Spectral predictions and Monte Carlo experiments for randomly coupled linear networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON config file; flags given here override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Matrix dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo sample count (0 = prediction-only where supported).
    #[arg(long)]
    samples: Option<usize>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Coupling strength g in (0, 1].
    #[arg(long)]
    g: Option<f64>,
    /// Spectral parameter zeta1 as "re" or "re,im".
    #[arg(long)]
    zeta1: Option<String>,
    /// Spectral parameter zeta2 as "re" or "re,im".
    #[arg(long)]
    zeta2: Option<String>,
    /// Linearization coupling alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Variance profile: constant | row-stochastic | two-block[:within,across] | <path>.
    #[arg(long)]
    profile: Option<String>,
    /// Entry law: complex-gaussian | real-gaussian | rademacher | uniform.
    #[arg(long)]
    law: Option<String>,
    /// Directory for report.json and CSV data files.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for sample batches (never changes any result).
    #[arg(long)]
    workers: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            samples: self.samples,
            seed: self.seed,
            g: self.g,
            zeta1: self.zeta1.clone(),
            zeta2: self.zeta2.clone(),
            alpha: self.alpha,
            profile: self.profile.clone(),
            law: self.law.clone(),
            out_dir: self.out_dir.clone(),
            workers: self.workers,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Kernel prediction versus Monte Carlo resolvent products.
    KernelMc(CommonArgs),
    /// Contour-integral traces versus the series oracle and direct evaluation.
    Functional(CommonArgs),
    /// Dyson fixed-point residuals and the kernel via the coupling derivative.
    MdeCheck(CommonArgs),
    /// Extremal spectrum of the saturated self-energy operator.
    FOperator(CommonArgs),
    /// Linearization block identity and coupling-scaling probe.
    Linearization(CommonArgs),
    /// Spectral-gap statistics of the sampled linearization.
    Gap(CommonArgs),
    /// Squared-norm decay curves against the critical power law.
    Decay(CommonArgs),
    /// Hermitian (Wigner) contrast decay.
    HermitianDecay(CommonArgs),
    /// Stationary autocorrelation below critical coupling.
    Autocorr(CommonArgs),
    /// The full acceptance suite at frozen parameters (only --out-dir and
    /// --workers are honored).
    AcceptAll(CommonArgs),
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::KernelMc(_) => "kernel-mc",
            Cmd::Functional(_) => "functional",
            Cmd::MdeCheck(_) => "mde-check",
            Cmd::FOperator(_) => "f-operator",
            Cmd::Linearization(_) => "linearization",
            Cmd::Gap(_) => "gap",
            Cmd::Decay(_) => "decay",
            Cmd::HermitianDecay(_) => "hermitian-decay",
            Cmd::Autocorr(_) => "autocorr",
            Cmd::AcceptAll(_) => "accept-all",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Cmd::KernelMc(a)
            | Cmd::Functional(a)
            | Cmd::MdeCheck(a)
            | Cmd::FOperator(a)
            | Cmd::Linearization(a)
            | Cmd::Gap(a)
            | Cmd::Decay(a)
            | Cmd::HermitianDecay(a)
            | Cmd::Autocorr(a)
            | Cmd::AcceptAll(a) => a,
        }
    }
}

fn main() {
    // Single-threaded BLAS: parallelism happens over sample indices only,
    // and thread-count-dependent reductions inside BLAS would break the
    // bit-for-bit reproducibility contract.
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    std::env::set_var("OMP_NUM_THREADS", "1");
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => std::process::exit(if pass { 0 } else { 1 }),
        Err(err) => {
            if err.downcast_ref::<config::ConfigError>().is_some() {
                eprintln!("config error: {err}");
                std::process::exit(2);
            }
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let name = cli.cmd.name();
    let args = cli.cmd.args();
    let file = match &args.config {
        Some(path) => config::load_file(path)?,
        None => FileConfig::default(),
    };
    let resolved = config::resolve(name, &file, &args.overrides())?;
    let out_dir = resolved.out_dir.clone();

    let report = if matches!(cli.cmd, Cmd::AcceptAll(_)) {
        experiments::accept::run(&resolved)?
    } else {
        let ctx = ExpContext::new(resolved)?;
        match cli.cmd {
            Cmd::KernelMc(_) => experiments::kernel_mc::run(&ctx)?,
            Cmd::Functional(_) => experiments::functional::run(&ctx)?,
            Cmd::MdeCheck(_) => experiments::mde_check::run(&ctx)?,
            Cmd::FOperator(_) => experiments::f_operator::run(&ctx)?,
            Cmd::Linearization(_) => experiments::linearization::run(&ctx)?,
            Cmd::Gap(_) => experiments::gap::run(&ctx)?,
            Cmd::Decay(_) => experiments::decay::run(&ctx)?,
            Cmd::HermitianDecay(_) => experiments::hermitian::run(&ctx)?,
            Cmd::Autocorr(_) => experiments::autocorr::run(&ctx)?,
            Cmd::AcceptAll(_) => unreachable!("handled above"),
        }
    };

    report::print_human(&report);
    if let Some(dir) = out_dir {
        let path = report::write_report(&dir, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(report.pass)
}
