use anyhow::Result;
use cavishift_cli::cache::{OperatorCache, CACHE_ENV};
use cavishift_cli::commands::{self, Context, Report};
use cavishift_cli::config::RunConfig;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cavishift", version, about = "Cavity resonances and small-particle resonance shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Operator cache directory (default: $CAVISHIFT_CACHE_DIR, else <out>/cache).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reduced resolutions (validate).
    #[arg(long, global = true)]
    quick: bool,
    /// Multiplies every upper-bound tolerance of `validate`.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Resonances near the configured seeds or window.
    Resonances,
    /// Mode samples at the volume nodes.
    Modes,
    /// Polarization tensor and Neumann-Poincare spectrum of the particle.
    Polarization,
    /// Predicted resonance shift, with an optional oracle convergence table.
    Shift,
    /// Shift predictions over `[sweep] values`.
    Sweep,
    /// Acceptance criteria; exits nonzero on any failure.
    Validate,
}

fn run(cli: Cli) -> Result<Report> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let cfg = match &cli.config {
        Some(p) => Some(RunConfig::from_path(p)?),
        None if cli.command == Command::Validate => None,
        None => anyhow::bail!("--config <path> is required for this command"),
    };
    let out = commands::resolve_out(cli.out.as_deref(), cfg.as_ref());
    let cache_dir = cli
        .cache
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| out.join("cache"));
    let ctx = Context {
        cache: match cli.command {
            Command::Resonances | Command::Modes | Command::Shift | Command::Sweep => Some(OperatorCache::new(cache_dir)?),
            _ => None,
        },
        out,
        quick: cli.quick,
        tolerance_scale: cli.tolerance_scale,
    };
    match (cli.command, &cfg) {
        (Command::Validate, c) => commands::cmd_validate(c.as_ref(), &ctx),
        (cmd, Some(c)) => match cmd {
            Command::Resonances => commands::cmd_resonances(c, &ctx),
            Command::Modes => commands::cmd_modes(c, &ctx),
            Command::Polarization => commands::cmd_polarization(c, &ctx),
            Command::Shift => commands::cmd_shift(c, &ctx),
            Command::Sweep => commands::cmd_sweep(c, &ctx),
            Command::Validate => unreachable!(),
        },
        (_, None) => unreachable!("config checked above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
