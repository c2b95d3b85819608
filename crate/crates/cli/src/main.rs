use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sinai_cli::config::Check;
use sinai_cli::criteria::{timing, Timing};
use sinai_cli::pipeline::{euler_failure_lambdas, render_table};
use sinai_cli::{load_bundle, run, ExperimentConfig, Outcome, Result, Suite};

#[derive(Parser)]
#[command(name = "sinai", version, about = "Numerical checks on flat Sinai billiards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the enabled stages of an experiment and write a report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of checks; dependencies are added.
        #[arg(long, value_delimiter = ',')]
        check: Vec<Check>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        lambda_cut: Option<f64>,
    },
    /// Print the criteria table of a bundle.
    Report { bundle: PathBuf },
    /// Evaluate one acceptance criterion (1 to 11) on the shipped configs.
    Criterion {
        id: u8,
        #[arg(long, default_value = "configs")]
        configs: PathBuf,
        #[arg(long, default_value = "out/criteria")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a hard criterion failed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            config,
            check,
            out,
            seed,
            resolution,
            lambda_cut,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !check.is_empty() {
                cfg.checks = check;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = resolution {
                cfg.resolution = r;
            }
            if lambda_cut.is_some() {
                cfg.lambda_cut = lambda_cut;
            }
            let out = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("out/run"));
            let report = run(&cfg, &out)?;
            print!("{}", render_table(&report, None));
            println!("bundle written to {}", out.display());
            Ok(report.hard_failures().is_empty())
        }
        Command::Report { bundle } => {
            let (report, timings) = load_bundle(&bundle)?;
            print!("{}", render_table(&report, timings.as_ref()));
            let euler = euler_failure_lambdas(&report);
            if !euler.is_empty() {
                let list: Vec<String> = euler.iter().map(|l| format!("{l:.6}")).collect();
                println!("Euler inequality fails at lambda = {}", list.join(", "));
            }
            Ok(report.hard_failures().is_empty())
        }
        Command::Criterion { id, configs, out, seed } => {
            let mut suite = Suite::new(configs, &out, seed);
            let (outcome, secs) = suite.evaluate(id)?;
            let t = timing(&outcome, secs);
            println!("{} [{secs:.2} s, budget {} s]", outcome.line(), outcome.budget_seconds);
            write_outcome(&out, &outcome, &t)?;
            Ok(!outcome.hard || outcome.pass)
        }
    }
}

fn write_outcome(out: &std::path::Path, outcome: &Outcome, t: &Timing) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("criterion_{:02}.json", outcome.id));
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&serde_json::json!({ "outcome": outcome, "timing": t }))?,
    )?;
    Ok(())
}
