use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phaseshift_cli::cache::Cache;
use phaseshift_cli::config::ExperimentConfig;
use phaseshift_cli::{check, default_out_dir, describe, run_config, CliError, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(
    name = "phaseshift",
    version,
    about = "Phase-shift experiments for convex planar obstacles"
)]
struct Cli {
    /// Cache directory (overrides PHASESHIFT_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML file or a built-in config name.
    Run {
        config: String,
        /// Output directory (default: the config's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every built-in acceptance config.
    Check {
        #[arg(long, default_value = "out/check")]
        out: PathBuf,
    },
    /// Inspect or clear the operator cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Ls,
    Rm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let cache = match cli.cache_dir {
        Some(dir) => Cache::new(dir),
        None => Cache::from_env(),
    };
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| default_out_dir(&cfg));
            let report = run_config(&cfg, &dir, &cache)?;
            print!("{}", describe(&report));
            println!("wrote {}", dir.display());
            Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Check { out } => {
            let reports = check(&out, &cache)?;
            for r in &reports {
                print!("{}", describe(r));
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!(
                "{} of {} configs passed; results in {}",
                reports.len() - failed,
                reports.len(),
                out.display()
            );
            Ok(if failed == 0 { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Cache {
            action: CacheAction::Ls,
        } => {
            let entries = cache.list()?;
            for e in &entries {
                println!(
                    "{}  {:>10} B  {:<11} k={} M={} N={}",
                    e.digest, e.bytes, e.provenance, e.k, e.grid, e.nodes
                );
            }
            println!("{} entries in {}", entries.len(), cache.dir().display());
            Ok(EXIT_PASS)
        }
        Command::Cache {
            action: CacheAction::Rm,
        } => {
            let n = cache.clear()?;
            println!("removed {n} entries from {}", cache.dir().display());
            Ok(EXIT_PASS)
        }
    }
}
