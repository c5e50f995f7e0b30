use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use etsafe_cli::compare::compare;
use etsafe_cli::config::LoadedConfig;
use etsafe_cli::experiment::EXIT_ASSERTION;
use etsafe_cli::oracle_check::{validate_oracle, CONSISTENCY_TOL, REL_TOL};
use etsafe_cli::{batch_exit_code, run_batch, CliError, RunOptions, RunSummary};

#[derive(Parser)]
#[command(name = "etsafe", version, about = "Event-triggered safety experiments")]
struct Cli {
    /// Suppress per-run summaries (errors are still printed)
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more configs and write their artifacts
    Run {
        /// Experiment config (repeat for batch mode)
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory, overriding the config's output_dir
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "on")]
        plots: Toggle,
        /// Number of configs simulated concurrently
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Run two configs on the same system and initial state side by side
    Compare {
        #[arg(long = "config", num_args = 1, required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        plots: Toggle,
    },
    /// Check the integrator against the closed-form counterexample solution
    ValidateOracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            configs,
            out,
            plots,
            parallel,
        } => {
            let opts = RunOptions {
                out,
                plots: plots == Toggle::On,
            };
            match run_batch(&configs, &opts, parallel) {
                Ok(results) => {
                    for (path, r) in configs.iter().zip(&results) {
                        match r {
                            Ok(s) if !cli.quiet => print_summary(s),
                            Ok(_) => {}
                            // config diagnostics already name the file
                            Err(e @ CliError::Config(_)) => eprintln!("error: {e}"),
                            Err(e) => eprintln!("error: {}: {e}", path.display()),
                        }
                    }
                    batch_exit_code(&results)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Compare {
            configs,
            out,
            plots,
        } => {
            if configs.len() != 2 {
                eprintln!("error: compare takes exactly two --config arguments");
                return ExitCode::from(2);
            }
            let loaded = LoadedConfig::from_path(&configs[0])
                .and_then(|a| Ok((a, LoadedConfig::from_path(&configs[1])?)));
            match loaded
                .map_err(CliError::from)
                .and_then(|(a, b)| compare(&a, &b, &out, plots == Toggle::On))
            {
                Ok(report) => {
                    if !cli.quiet {
                        let fmt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.6e}"));
                        println!(
                            "a: {} events, min interevent {}",
                            report.a.events,
                            fmt(report.min_interevent[0])
                        );
                        println!(
                            "b: {} events, min interevent {}",
                            report.b.events,
                            fmt(report.min_interevent[1])
                        );
                        println!("wrote {}", out.display());
                    }
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::ValidateOracle { seed, trials } => {
            let start = Instant::now();
            let summary = validate_oracle(seed, trials as usize);
            for t in &summary.failures {
                eprintln!(
                    "FAIL trial {}: x_i = [{:e}, {:e}], dt = {:e}, rel_error = {:e} (tol {REL_TOL:e}), consistency = {:e} (tol {CONSISTENCY_TOL:e})",
                    t.index, t.x_i[0], t.x_i[1], t.dt, t.rel_error, t.consistency_error
                );
            }
            if !cli.quiet {
                println!(
                    "validate-oracle seed={seed} trials={trials}: max rel error {:.3e}, max consistency error {:.3e}, {} failures, {:.2}s",
                    summary.max_rel_error,
                    summary.max_consistency_error,
                    summary.failures.len(),
                    start.elapsed().as_secs_f64()
                );
            }
            if summary.passed() {
                0
            } else {
                EXIT_ASSERTION
            }
        }
    };
    ExitCode::from(code as u8)
}

fn fail(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn print_summary(s: &RunSummary) {
    let r = &s.report;
    let fmt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.6e}"));
    println!(
        "{}: {} ({}) {:?} at t = {:.6}, {} events, min interevent {}, tau {}",
        s.config.display(),
        r.system,
        r.trigger,
        r.termination,
        r.t_end,
        r.events,
        fmt(r.miet.min),
        fmt(r.miet.tau)
    );
    for a in &r.assertions {
        println!(
            "  assert {}: expected {}, got {} -> {}",
            a.name,
            a.expected,
            a.actual,
            if a.pass { "ok" } else { "FAILED" }
        );
    }
    println!("  wrote {}", s.out_dir.display());
}
