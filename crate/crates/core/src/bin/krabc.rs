use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use krabc::experiment::{
    load_config, run_experiment, validate, ExperimentConfig, ExperimentName, ExperimentReport, Scale,
};

const CSV_HELP: &str = "\
Output files (fixed column order):
  results.csv  trial, seed, status, param_error, data_error, wall_s,
               <experiment metrics>, <one column per parameter>
  trace.csv    trial, seed, iteration, sum_of_weights, data_error,
               y_bandwidth, theta_bandwidth, n_diverged, spread, wall_s,
               est_<parameter>...
  summary.csv  metric, mean, std, median, n, note

wall_s is 0 unless the config sets record_timing, so reruns are byte-identical.
KRABC_SEED overrides master_seed.
Exit codes: 0 success, 1 every trial failed, 2 config error.";

#[derive(Parser)]
#[command(name = "krabc", version, about = "Kernel recursive ABC point estimation", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: config value, else all CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (default: config value).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dry-run checks for a config without running any trial.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the fully resolved config of a built-in benchmark as JSON.
    Show {
        experiment: String,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
    },
    /// Run a built-in benchmark.
    Bench {
        /// gauss-misspecified, blowfly, alpha-stable, mixture or conjugate-oracle.
        experiment: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(2)
}

fn execute(cfg: &ExperimentConfig) -> ExitCode {
    eprintln!(
        "running {} ({} trials, {} jobs) into {}",
        cfg.experiment.as_str(),
        cfg.trials,
        cfg.jobs(),
        cfg.output_dir().display()
    );
    match run_experiment(cfg) {
        Ok(report) => finish(&report),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn finish(report: &ExperimentReport) -> ExitCode {
    for r in &report.records {
        match &r.failure {
            None => println!(
                "trial {:>3} seed {:>6}  param_error {}  data_error {}",
                r.trial,
                r.seed,
                r.param_error.map_or("-".into(), |v| format!("{v:.4}")),
                r.data_error.map_or("-".into(), |v| format!("{v:.4}")),
            ),
            Some(m) => println!("trial {:>3} seed {:>6}  FAILED: {m}", r.trial, r.seed),
        }
    }
    println!("wrote {}", report.output_dir.display());
    if report.all_failed() {
        eprintln!("every trial failed");
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn named(experiment: &str, scale: ScaleArg) -> Result<ExperimentConfig, ExitCode> {
    let name = match ExperimentName::parse(experiment) {
        Some(n) if n != ExperimentName::Custom => n,
        _ => return Err(config_error(format!("unknown benchmark {experiment:?}"))),
    };
    let scale = match scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    ExperimentConfig::named(name, scale).map_err(config_error)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Show { experiment, scale } => match named(&experiment, scale) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, jobs, out } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            if let Err(e) = cfg.apply_seed_env() {
                return config_error(e);
            }
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            if out.is_some() {
                cfg.output_dir = out;
            }
            if let Err(e) = cfg.validate_schema() {
                return config_error(e);
            }
            execute(&cfg)
        }
        Command::Validate { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let report = validate(&cfg);
            for c in &report.checks {
                println!("[{}] {}: {}", if c.ok { "ok" } else { "FAIL" }, c.name, c.detail);
            }
            println!("total simulations: {}", report.total_simulations);
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Bench {
            experiment,
            trials,
            scale,
            jobs,
            out,
        } => {
            let mut cfg = match named(&experiment, scale) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Err(e) = cfg.apply_seed_env() {
                return config_error(e);
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.jobs = jobs;
            if out.is_some() {
                cfg.output_dir = out;
            }
            if let Err(e) = cfg.validate_schema() {
                return config_error(e);
            }
            execute(&cfg)
        }
    }
}
