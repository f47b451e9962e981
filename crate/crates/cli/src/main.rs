#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slowfast_cli::experiments::{run_check_conditions, run_convergence, run_diagnostics, run_fbar, run_simulate};
use slowfast_cli::output;
use slowfast_cli::{CliError, ExperimentConfig};
use slowfast_core::{replay_coupled, NoisePath, SchemeParams};

#[derive(Parser)]
#[command(name = "slowfast", version, about = "Averaging experiments for slow-fast stochastic PDEs")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Strong error between coupled and averaged slow paths over the epsilon grid.
    Converge,
    /// Moment, increment, deviation and ergodicity suites.
    Diagnose,
    /// Randomized checks of the monotonicity and dissipativity conditions.
    Check,
    /// Frozen-equation estimate of the averaged coefficient at `x0`.
    Fbar,
    /// Dump one coupled trajectory and its noise record.
    Simulate {
        /// Scale separation; the first grid value when omitted.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Re-run on a noise record written by an earlier `simulate`.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = load(&cli.common)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Converge => {
            let report = run_convergence(&cfg)?;
            output::write_convergence(&out.join("convergence.csv"), &report)?;
            let summary = output::convergence_summary(&report);
            output::write_text(&out.join("convergence_report.txt"), &summary)?;
            print!("{summary}");
            Ok(if report.numerical_failure {
                3
            } else if report.passed {
                0
            } else {
                1
            })
        }
        Command::Diagnose => {
            let report = run_diagnostics(&cfg)?;
            output::write_diagnostics(&out, &report)?;
            let summary = output::diagnostics_summary(&report);
            output::write_text(&out.join("diagnostics_summary.txt"), &summary)?;
            print!("{summary}");
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Check => {
            let reports = run_check_conditions(&cfg)?;
            output::write_conditions(&out.join("conditions.csv"), &reports)?;
            for r in &reports {
                println!(
                    "{:<4} samples {:>5} violations {:>5} worst margin {:.4e}",
                    r.condition_id.label(),
                    r.samples,
                    r.violations,
                    r.worst_margin
                );
            }
            Ok(if reports.iter().all(|r| r.passed()) { 0 } else { 1 })
        }
        Command::Fbar => {
            let report = run_fbar(&cfg)?;
            output::write_fbar(&out.join("fbar.csv"), &report)?;
            let est = &report.estimate;
            println!("node  estimate  std_error  oracle");
            for (i, (v, se)) in est.value.values().iter().zip(est.std_error.values()).enumerate() {
                match &report.oracle {
                    Some(o) => println!("{i:>4}  {v:.6e}  {se:.2e}  {:.6e}", o.values()[i]),
                    None => println!("{i:>4}  {v:.6e}  {se:.2e}  -"),
                }
            }
            if let Some(z) = report.max_z() {
                println!("max |estimate - oracle| / std_error = {z:.3}");
            }
            if est.short_burn_in {
                println!("warning: burn-in shorter than 5 relaxation times");
            }
            Ok(0)
        }
        Command::Simulate { epsilon, replay } => {
            let eps = epsilon.unwrap_or(cfg.epsilon_grid[0]);
            let (model, run) = run_simulate(&cfg, eps)?;
            let run = match replay {
                Some(path) => {
                    let noise = NoisePath::from_bytes(&std::fs::read(path)?)?;
                    let params = SchemeParams::for_model(&model, cfg.dt_macro);
                    let mut replayed = replay_coupled(&model, cfg.horizon, &params, &noise)?;
                    replayed.noise = Some(noise);
                    replayed
                }
                None => run,
            };
            output::write_trajectory(&out.join("trajectory.csv"), &run, cfg.dt_macro)?;
            if let Some(noise) = &run.noise {
                std::fs::write(out.join("noise.bin"), noise.to_bytes())?;
            }
            println!("sup |X|^2 = {:.6e}", run.stats.sup_norm_x_sq);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
