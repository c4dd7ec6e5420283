use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use relaycov::experiment::{self, report, EngineKind, ExperimentConfig, Overrides};

/// Output directory override; takes precedence over the config file but not
/// over `--out`.
const OUT_ENV: &str = "RELAYCOV_OUT";

#[derive(Parser)]
#[command(
    name = "relaycov",
    version,
    about = "Coverage of UAV relay networks: analytic engine and Monte-Carlo simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write CSV/SVG results.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// Root seed of the simulator.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarise analytic-vs-MC agreement of a results CSV.
    Compare {
        csv: PathBuf,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Analytic,
    Mc,
    Both,
}

impl From<Engine> for EngineKind {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Analytic => EngineKind::Analytic,
            Engine::Mc => EngineKind::Mc,
            Engine::Both => EngineKind::Both,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            engine,
            seed,
            out,
            no_plots,
            jobs,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
                cfg.out_dir = PathBuf::from(dir);
            }
            if jobs == Some(0) {
                eprintln!("error: --jobs must be >= 1");
                return ExitCode::from(2);
            }
            let overrides = Overrides {
                engine: engine.map(Into::into),
                seed,
                out_dir: out,
                no_plots,
                jobs,
            };
            overrides.apply(&mut cfg);
            for w in cfg.network.warnings() {
                eprintln!("warning: {w}");
            }
            match experiment::run_to_dir(&cfg, overrides.jobs) {
                Ok(a) => {
                    println!("wrote {}", a.csv.display());
                    println!("wrote {}", a.timings.display());
                    for p in &a.plots {
                        println!("wrote {}", p.display());
                    }
                    if a.failures > 0 {
                        eprintln!(
                            "error: {} row(s) failed; see the `error` column",
                            a.failures
                        );
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Compare { csv, out } => match report::compare_report(&csv) {
            Ok(text) => {
                print!("{text}");
                if let Some(path) = out {
                    if let Err(e) = std::fs::write(&path, &text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::FAILURE;
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
