use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use traced_cli::{emit_report, evaluate_checkpoint, run_experiment_with, ReportOutcome, RunConfig};
use traced_core::{run_verification, Mode, VerifyOptions};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "traced", version, about = "Regret-driven maze curricula for a PPO student")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the configured curriculum and write logs to the output directory.
    Run {
        /// TOML file, or the preset name `desk` or `minigrid`.
        #[arg(long, default_value = "desk")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// traced, accel, plr, dr, traced-no-atpl or traced-no-cl.
        #[arg(long)]
        mode: Option<Mode>,
        /// Total update budget.
        #[arg(long)]
        updates: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Held-out suite: `desk`, `full`, or a directory of level JSON files.
        #[arg(long)]
        suite: Option<String>,
        /// Episodes per held-out level.
        #[arg(long)]
        episodes: Option<usize>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Evaluate a checkpoint on held-out levels.
    Evaluate {
        checkpoint: PathBuf,
        /// `desk`, `full`, or a directory of level JSON files.
        #[arg(long, default_value = "desk")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarise a run directory into CSV and SVG files.
    Report {
        run_dir: PathBuf,
        /// Window size in updates for the complexity series.
        #[arg(long)]
        window: Option<u64>,
    },
    /// Check the implementation against brute-force references.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn usage(err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            mode,
            updates,
            out,
            suite,
            episodes,
            dump_config,
        } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return usage(e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(u) = updates {
                cfg.total_updates = u;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(s) = suite {
                cfg.eval_suite = s;
            }
            if let Some(e) = episodes {
                cfg.eval_episodes = e;
            }
            if let Err(e) = cfg.validate() {
                return usage(e);
            }
            if dump_config {
                print!("{}", cfg.to_toml());
                return ExitCode::SUCCESS;
            }
            let start = Instant::now();
            let total = cfg.total_updates;
            let every = (total / 20).max(1);
            let result = run_experiment_with(&cfg, |t, _| {
                if t % every == 0 {
                    eprintln!("[{:>7.1}s] update {t}/{total}", start.elapsed().as_secs_f64());
                }
            });
            match result {
                Ok(s) => {
                    println!(
                        "{} seed {}: {} updates ({} replay, {} exploration), held-out mean solved rate {:.3}, median {:.3}",
                        s.mode,
                        s.seed,
                        s.total_updates,
                        s.replay_steps,
                        s.exploration_steps,
                        s.final_eval.mean_solved_rate,
                        s.final_eval.median_solved_rate
                    );
                    println!("artifacts in {}", cfg.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => usage(e),
            }
        }
        Command::Evaluate {
            checkpoint,
            suite,
            episodes,
            seed,
            out,
        } => match evaluate_checkpoint(&checkpoint, &suite, episodes, seed) {
            Ok(r) => {
                for l in &r.levels {
                    println!(
                        "{:<16} solved {:.3}  return {:.3}",
                        l.name, l.solved_rate, l.mean_return
                    );
                }
                println!(
                    "mean solved rate {:.3}, median {:.3}",
                    r.mean_solved_rate, r.median_solved_rate
                );
                if let Some(path) = out {
                    let json = serde_json::to_string_pretty(&r).expect("report serialises");
                    if let Err(e) = std::fs::write(&path, json) {
                        return usage(anyhow::anyhow!("cannot write {}: {e}", path.display()));
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => usage(e),
        },
        Command::Report { run_dir, window } => match emit_report(&run_dir, window) {
            Ok(ReportOutcome::Empty) => {
                println!("no logs in {} yet; nothing to report", run_dir.display());
                ExitCode::SUCCESS
            }
            Ok(ReportOutcome::Written(files)) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => usage(e),
        },
        Command::Verify { seed, out } => {
            let start = Instant::now();
            let report = run_verification(&VerifyOptions {
                seed,
                ..VerifyOptions::default()
            });
            for c in &report.checks {
                println!(
                    "{:<4} {:<26} value {:<12.3e} tol {:<9.1e} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.detail
                );
            }
            println!("convention: {}", report.decomposition_convention);
            println!("{:.1}s", start.elapsed().as_secs_f64());
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, report.to_json()) {
                    return usage(anyhow::anyhow!("cannot write {}: {e}", path.display()));
                }
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", report.failed().join(", "));
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
    }
}
