use std::path::PathBuf;
use std::process::ExitCode;

use blockmirror::harness::{
    load_config, run_experiment, verify_bounds, ExperimentConfig, ExperimentId,
};
use blockmirror::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Online mirror descent experiments over block norms")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its CSVs, plot and manifest.
    Run {
        #[arg(long, value_parser = |s: &str| s.parse::<ExperimentId>().map_err(|e| e.to_string()))]
        experiment: ExperimentId,
        /// TOML file; keys given on the command line win.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Run seed indices 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Check the theoretical bounds and exit nonzero on any failure.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_code(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Run {
            experiment,
            config,
            seed,
            out,
            seeds,
        } => {
            let mut cfg = match config {
                Some(p) => match load_config(&p) {
                    Ok(c) => c,
                    Err(e) => return config_code(&e),
                },
                None => ExperimentConfig::default(),
            };
            if cfg.experiment.is_some_and(|e| e != experiment) {
                eprintln!(
                    "error: config is for '{}', not '{experiment}'",
                    cfg.experiment.unwrap()
                );
                return ExitCode::from(2);
            }
            cfg.experiment = Some(experiment);
            cfg.master_seed = seed.or(cfg.master_seed);
            if let Some(k) = seeds {
                cfg.seeds = Some((0..k).collect());
            }
            let summary = match run_experiment(&cfg, Some(&out)) {
                Ok(s) => s,
                Err(e) => return config_code(&e),
            };
            for r in &summary.rows {
                println!(
                    "{:<28} mean {:>12.4} ± {:<10.4} ({} seeds, {} failed) {}",
                    r.cell_id, r.mean_regret, r.stderr, r.seeds, r.failed, r.pass_flags
                );
            }
            for c in &summary.checks {
                println!("{c}");
            }
            println!("wrote {}", out.display());
            ExitCode::from(summary.exit_code() as u8)
        }
        Cmd::Verify { suite, seed } => match verify_bounds(&suite, seed) {
            Ok(checks) => {
                for c in &checks {
                    println!("{c}");
                }
                let failed = checks.iter().filter(|c| !c.pass).count();
                println!("{} checks, {failed} failed", checks.len());
                ExitCode::from(u8::from(failed > 0))
            }
            Err(e) => config_code(&e),
        },
    }
}
