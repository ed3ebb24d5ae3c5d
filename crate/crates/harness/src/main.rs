use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use apbm_core::systems::{lorenz_simulate, tracking_simulate};
use apbm_harness::config::{ExperimentConfig, Scenario};
use apbm_harness::output::{write_trajectory, TRAJECTORY_FILE};
use apbm_harness::{plot, run_experiment, Execution, Experiment, Method, Preset, Summary};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "apbm", version, about = "APBM filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one ground-truth trajectory with measurements.
    Simulate {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, value_enum, default_value = "paper")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a config over a λ grid and run count given on the command line.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot rmse.csv (and theta_var.csv when present) from a results directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_summary(summary: &Summary) {
    for s in &summary.rmse {
        let last = s.values.last().copied().unwrap_or(f64::NAN);
        let lambda = s.lambda.map(|l| format!("lambda={l}")).unwrap_or_default();
        println!("{:<11}{lambda:<20}final rmse {last:.4}", s.method.name());
    }
    for s in &summary.theta_var {
        let last = s.values.last().copied().unwrap_or(f64::NAN);
        println!(
            "{:<11}{:<20}final {last:.6e}",
            "theta_var",
            format!("lambda={}", s.lambda)
        );
    }
}

fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let exec = Execution::from_env()?;
    let (mc, summary) = run_experiment(cfg, exec, out)?;
    let failed: usize = (0..mc.specs.len()).map(|i| mc.failures(i)).sum();
    print_summary(&summary);
    println!(
        "{} runs, {failed} failed filter runs, results in {}",
        mc.records.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            experiment,
            preset,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::defaults(experiment, preset)?;
            let truth = match &cfg.scenario {
                Scenario::Tracking(t) => tracking_simulate(t, seed),
                Scenario::Lorenz(l) => lorenz_simulate(l, seed),
            }
            .context("simulation failed")?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join(TRAJECTORY_FILE);
            write_trajectory(&path, &truth, None)?;
            println!("{} steps written to {}", truth.steps(), path.display());
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            execute(&cfg, &out)?;
        }
        Command::Sweep {
            config,
            lambdas,
            runs,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !cfg.methods.contains(&Method::Apbm) {
                bail!("sweep needs apbm among the configured methods");
            }
            cfg.lambda_grid = lambdas;
            cfg.n_runs = runs;
            cfg.trajectory_runs.retain(|r| *r < runs);
            cfg.validate()?;
            execute(&cfg, &out)?;
        }
        Command::Plot { input, out } => {
            plot::plot_dir(&input, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
