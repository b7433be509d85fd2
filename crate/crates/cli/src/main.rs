use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rennala_cli::commands::{self, TheoryInputs};
use rennala_cli::{CliError, ExperimentConfig};
use rennala_core::verify::HardnessConfig;

#[derive(Parser)]
#[command(
    name = "rennala",
    version,
    about = "Asynchronous SGD/MVR simulator and verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of a config for one seed and write its traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seed value; defaults to the first entry of `seeds`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the full grid over all seeds and rank the configs.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the complexity report and run the bound checks.
    VerifyTheory {
        /// Take sigma, Delta, L_bar and the delays from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lbar: Option<f64>,
        /// Comma-separated seconds per gradient, one per worker.
        #[arg(long)]
        taus: Option<String>,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numeric checks of the zero-chain hard instance.
    VerifyHardness {
        #[arg(long = "T", default_value_t = 20)]
        t: usize,
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare simulated collection times against T(b).
    VerifyEngine {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check this profile, e.g. `--taus 1,2,4`.
        #[arg(long)]
        taus: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = commands::output_dir(out.as_deref(), cfg.out.as_deref());
            eprintln!("{}", commands::config_summary(&cfg));
            let files = commands::run(&cfg, seed, &out)?;
            println!("wrote {} trace(s) to {}", files.len(), out.display());
        }
        Command::Sweep { config, jobs, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = commands::output_dir(out.as_deref(), cfg.out.as_deref());
            let jobs = jobs.unwrap_or_else(default_jobs);
            eprintln!("{}, {} thread(s)", commands::config_summary(&cfg), jobs);
            let t0 = Instant::now();
            let result = commands::sweep(&cfg, jobs, &out)?;
            for entry in 0..cfg.methods.len() {
                if let Some(best) = result.top_k(entry, 1).first() {
                    println!(
                        "best {}: {} = {:.6e}",
                        commands::describe(best.kind, &best.hyper),
                        cfg.metric.name(),
                        best.score
                    );
                }
            }
            println!(
                "{} runs in {:.1} s, results in {}",
                cfg.total_runs(),
                t0.elapsed().as_secs_f64(),
                out.display()
            );
        }
        Command::VerifyTheory {
            config,
            eps,
            sigma,
            delta,
            lbar,
            taus,
            cases,
            seed,
            out,
        } => {
            let (mut inputs, cfg_out) = match &config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(path)?;
                    (TheoryInputs::from_config(&cfg, eps)?, cfg.out.clone())
                }
                None => (TheoryInputs::default_with(eps), None),
            };
            if let Some(s) = sigma {
                inputs.sigma = s;
            }
            if let Some(d) = delta {
                inputs.delta = d;
            }
            if let Some(l) = lbar {
                inputs.l_bar = l;
            }
            if let Some(t) = taus {
                inputs.profile = commands::parse_taus(&t)?;
            }
            let out = commands::output_dir(out.as_deref(), cfg_out.as_deref());
            commands::verify_theory(&inputs, cases, seed, &out)?;
        }
        Command::VerifyHardness {
            t,
            p,
            trials,
            seed,
            out,
        } => {
            let mut cfg = HardnessConfig::new(t, p, trials);
            cfg.seed = seed;
            let out = commands::output_dir(out.as_deref(), None);
            commands::verify_hardness(&cfg, &out)?;
        }
        Command::VerifyEngine {
            cases,
            seed,
            taus,
            out,
        } => {
            let out = commands::output_dir(out.as_deref(), None);
            commands::verify_engine(cases, seed, taus.as_deref(), &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
