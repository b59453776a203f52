use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adaptive_od::data::AdaptiveDataset;
use adaptive_od::estimators::{diag_online_debias, online_debias};
use adaptive_od::harness::checks::run_checks;
use adaptive_od::harness::experiment::simulate_replication;
use adaptive_od::harness::report::fmt_g;
use adaptive_od::harness::{emit_csv, run_experiment, run_experiment_with_threads, ExperimentConfig};
use adaptive_od::inference::{ci_direction, ci_naive_ols, Tail};
use adaptive_od::simulators::export_dataset;
use adaptive_od::tuning::{ScheduleKind, TuningSchedule};
use adaptive_od::Result;

#[derive(Parser)]
#[command(name = "adaptive-od", version, about = "Online debiasing for adaptively collected data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset and write it as CSV (plus a JSON sidecar).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Replication index whose random stream is used.
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit least squares and online debiasing to a dataset CSV.
    Fit {
        dataset: PathBuf,
        #[arg(long, default_value = "general")]
        schedule: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run a Monte Carlo coverage experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fast invariant checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn fit(path: &Path, schedule: &str, alpha: f64) -> Result<()> {
    let ds = AdaptiveDataset::read_csv_path(path)?;
    let n = ds.len();
    let d = ds.dim();
    let tuning = match ScheduleKind::parse(schedule)? {
        ScheduleKind::Bandit => TuningSchedule::bandit(n)?,
        ScheduleKind::General => TuningSchedule::general(n, d)?,
        ScheduleKind::Ar1 => TuningSchedule::ar1(n)?,
        ScheduleKind::Exploration => {
            return Err(adaptive_od::Error::InvalidArgument(
                "the exploration schedule needs the context distribution; use an experiment config".into(),
            ))
        }
    };
    let od = online_debias(&ds, &tuning)?;
    let sigma2 = od.ols.sigma2_hat;
    println!("n = {n}, d = {d}, gamma_n = {}, sigma2_hat = {}", fmt_g(tuning.gamma_n), fmt_g(sigma2));
    println!("coordinate,theta_ls,theta_od,ols_lo,ols_hi,od_lo,od_hi");
    for k in 0..d {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        let ols_ci = ci_naive_ols(&od.ols, sigma2, alpha, &v, Tail::TwoSided)?;
        let diag = diag_online_debias(&ds, &v, &tuning)?;
        let od_ci = ci_direction(&diag, sigma2, alpha, Tail::TwoSided)?;
        println!(
            "{},{},{},{},{},{},{}",
            k + 1,
            fmt_g(od.ols.theta_ls[k]),
            fmt_g(od.theta_od[k]),
            fmt_g(ols_ci.lo),
            fmt_g(ols_ci.hi),
            fmt_g(od_ci.lo),
            fmt_g(od_ci.hi)
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, seed, replication, out } => {
            let cfg = load(&config, seed)?;
            let (ds, _) = simulate_replication(&cfg, replication)?;
            export_dataset(&ds, &out)?;
            log::info!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Fit { dataset, schedule, alpha } => fit(&dataset, &schedule, alpha)?,
        Command::Experiment { config, seed, threads, out } => {
            let mut cfg = load(&config, seed)?;
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let report = match threads {
                Some(t) => run_experiment_with_threads(&cfg, t)?,
                None => run_experiment(&cfg)?,
            };
            emit_csv(&report, &dir)?;
            let cfg_path = dir.join("config.txt");
            std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| adaptive_od::Error::Io { path: cfg_path, source: e })?;
            log::info!("wrote {} coverage rows to {}", report.rows.len(), dir.display());
        }
        Command::Check { seed } => {
            let results = run_checks(seed);
            let mut ok = true;
            for c in &results {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
