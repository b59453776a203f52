//! Monte Carlo driver: simulate, fit, build intervals, aggregate.

use rayon::prelude::*;

use crate::data::AdaptiveDataset;
use crate::error::{Error, Result};
use crate::estimators::{diag_online_debias, ols, online_debias_from};
use crate::harness::config::{ExperimentConfig, ExplorationRate, NoiseVariance, Scenario};
use crate::harness::report::{CoverageReport, CoverageRow, ErrorRow, ReplicationSummary};
use crate::inference::{
    ci_direction, ci_naive_ols, ci_naive_od, diagnostics_assumptions, CiMethod, ConfidenceInterval, RidgeFit, Tail,
};
use crate::linalg::{dot, SymmetricMatrix};
use crate::rng::{stream, StreamRng, SHARED_STREAM};
use crate::simulators::{
    context_second_moment, run_adversarial_design, run_ar1, run_bandit, run_fixed_design, run_linear_bandit,
    sphere_contexts, sufficient_exploration_rate, LinearBandit,
};
use crate::tuning::{augment_dataset, uniform_sphere, ScheduleKind, TuningSchedule};

/// Quantities fixed across replications.
#[derive(Clone, Debug)]
struct Shared {
    linear_bandit: Option<LinearBandit>,
    fixed_rows: Option<Vec<Vec<f64>>>,
    second_moment: Option<SymmetricMatrix>,
}

fn shared(cfg: &ExperimentConfig) -> Result<Shared> {
    let mut rng = stream(cfg.seed, SHARED_STREAM);
    let mut out = Shared { linear_bandit: None, fixed_rows: None, second_moment: None };
    match cfg.scenario {
        Scenario::LinearBandit => {
            let contexts = sphere_contexts(cfg.contexts, cfg.theta_star.len(), &mut rng);
            let eps = match cfg.exploration {
                ExplorationRate::Auto => sufficient_exploration_rate(&contexts, cfg.n)?,
                ExplorationRate::Fixed(e) => e,
            };
            out.second_moment = Some(context_second_moment(&contexts)?);
            out.linear_bandit = Some(LinearBandit { contexts, eps: vec![eps], lambda_ridge: cfg.lambda_ridge });
        }
        Scenario::FixedDesign => {
            let rows: Vec<Vec<f64>> = (0..cfg.n).map(|_| uniform_sphere(cfg.theta_star.len(), &mut rng)).collect();
            out.fixed_rows = Some(rows);
        }
        _ => {}
    }
    Ok(out)
}

fn simulate(cfg: &ExperimentConfig, shared: &Shared, rng: &mut StreamRng) -> Result<(AdaptiveDataset, Vec<f64>)> {
    let (ds, theta) = match cfg.scenario {
        Scenario::Bandit => (run_bandit(cfg.policy, &cfg.theta_star, cfg.n, cfg.noise, rng)?, cfg.theta_star.clone()),
        Scenario::Ar1 => (run_ar1(cfg.theta_star[0], cfg.n, cfg.noise, rng)?, cfg.theta_star.clone()),
        Scenario::LinearBandit => {
            let lb = shared.linear_bandit.as_ref().expect("shared contexts");
            (run_linear_bandit(lb, &cfg.theta_star, cfg.n, cfg.noise, rng)?, cfg.theta_star.clone())
        }
        Scenario::Adversarial => {
            let run = run_adversarial_design(cfg.dim, cfg.n, rng)?;
            (run.dataset, run.theta_star)
        }
        Scenario::FixedDesign => {
            let rows = shared.fixed_rows.as_ref().expect("shared design");
            (run_fixed_design(rows, &cfg.theta_star, cfg.noise, rng)?, cfg.theta_star.clone())
        }
    };
    if cfg.augment {
        let noise = cfg.noise;
        let aug = augment_dataset(&ds, rng, |x, r| dot(x, &theta) + noise.sample(r))?;
        return Ok((aug, theta));
    }
    Ok((ds, theta))
}

/// Dataset and true parameter of replication `r`, exactly as
/// [`run_experiment`] would see them.
pub fn simulate_replication(cfg: &ExperimentConfig, r: usize) -> Result<(AdaptiveDataset, Vec<f64>)> {
    cfg.validate()?;
    let shared = shared(cfg)?;
    let mut rng = stream(cfg.seed, r as u64);
    let (mut ds, theta) = simulate(cfg, &shared, &mut rng)?;
    ds.meta.insert("seed".into(), cfg.seed.to_string());
    ds.meta.insert("replication".into(), r.to_string());
    Ok((ds, theta))
}

/// The tuning schedule a configuration implies for a dataset of `n` rows.
pub fn schedule_for(cfg: &ExperimentConfig, n: usize, dim: usize, second_moment: Option<&SymmetricMatrix>) -> Result<TuningSchedule> {
    match cfg.schedule {
        ScheduleKind::Bandit => TuningSchedule::bandit(n),
        ScheduleKind::General => TuningSchedule::general(n, dim),
        ScheduleKind::Ar1 => TuningSchedule::ar1(n),
        ScheduleKind::Exploration => {
            let g = second_moment.ok_or_else(|| {
                Error::InvalidArgument("exploration schedule needs a linear-bandit scenario".into())
            })?;
            let eps = match cfg.exploration {
                ExplorationRate::Fixed(e) => e,
                ExplorationRate::Auto => {
                    return Err(Error::InvalidArgument("exploration rate unresolved".into()));
                }
            };
            TuningSchedule::exploration(n, eps * cfg.n as f64, g)
        }
    }
}

/// `(covered, width)` for the lower, upper and two-sided interval.
type TailCells = [(bool, f64); 3];

/// Per-replication outcome, indexed `[target][method][alpha]`.
struct Outcome {
    hits: Vec<Vec<Vec<TailCells>>>,
    od_standardized: Vec<f64>,
    summary: ReplicationSummary,
}

fn replicate(cfg: &ExperimentConfig, shared: &Shared, r: usize) -> Result<Outcome> {
    let mut rng = stream(cfg.seed, r as u64);
    let (ds, theta) = simulate(cfg, shared, &mut rng)?;
    let d = ds.dim();
    let mut resolved = cfg.clone();
    if let (ScheduleKind::Exploration, Some(lb)) = (cfg.schedule, &shared.linear_bandit) {
        resolved.exploration = ExplorationRate::Fixed(lb.eps[0]);
    }
    let tuning = schedule_for(&resolved, ds.len(), d, shared.second_moment.as_ref())?;
    let fit = ols(&ds)?;
    let sigma2 = match cfg.noise_variance {
        NoiseVariance::Estimate => fit.sigma2_hat,
        NoiseVariance::Known => cfg.noise.sigma2,
    };
    let od = online_debias_from(&ds, &tuning, fit)?;
    let od_standardized = od.standardized_error(&theta, sigma2);
    let err_ls: Vec<f64> = od.ols.theta_ls.iter().zip(&theta).map(|(a, b)| a - b).collect();
    let ols_standardized = od.s_half.mul_vec(&err_ls).into_iter().map(|v| v / sigma2.sqrt()).collect();
    let min_pulls = ds.is_bandit().then(|| od.ols.cov.s.diag().into_iter().fold(f64::INFINITY, f64::min));
    let summary = ReplicationSummary {
        diagnostics: diagnostics_assumptions(&od)?,
        min_pulls,
        gamma_n: tuning.gamma_n,
        sigma2_hat: sigma2,
        ols_standardized,
    };

    let ridge = if cfg.methods.contains(&CiMethod::Concentration) {
        Some(RidgeFit::new(&ds, cfg.lambda_ridge)?)
    } else {
        None
    };
    let mut hits = Vec::with_capacity(cfg.targets.len());
    for &k in &cfg.targets {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        let truth = theta[k];
        let diag = if cfg.methods.contains(&CiMethod::OdDirection) {
            Some(diag_online_debias(&ds, &v, &tuning)?)
        } else {
            None
        };
        let mut per_method = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let mut per_alpha = Vec::with_capacity(cfg.alphas.len());
            for &alpha in &cfg.alphas {
                let mut cell = [(false, 0.0); 3];
                for (slot, tail) in Tail::ALL.into_iter().enumerate() {
                    let ci: ConfidenceInterval = match method {
                        CiMethod::OdDirection => ci_direction(diag.as_ref().expect("diag fit"), sigma2, alpha, tail)?,
                        CiMethod::NaiveOls => ci_naive_ols(&od.ols, sigma2, alpha, &v, tail)?,
                        CiMethod::NaiveOd => ci_naive_od(&od, sigma2, alpha, &v, tail)?,
                        CiMethod::Concentration => ridge.as_ref().expect("ridge fit").interval(
                            alpha,
                            &v,
                            cfg.noise.sigma2.sqrt(),
                            cfg.theta_bound,
                            tail,
                        )?,
                        CiMethod::WDecorrelation => unreachable!("filtered before replication"),
                    };
                    cell[slot] = (ci.contains(truth), ci.width());
                }
                per_alpha.push(cell);
            }
            per_method.push(per_alpha);
        }
        hits.push(per_method);
    }
    Ok(Outcome { hits, od_standardized, summary })
}

/// Label for the `scenario` column of target `k`.
fn scenario_label(cfg: &ExperimentConfig, k: usize) -> String {
    if cfg.targets.len() == 1 {
        cfg.name.clone()
    } else {
        format!("{}:theta{}", cfg.name, k + 1)
    }
}

/// Runs every replication (in parallel on the current rayon pool) and
/// aggregates in replication order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.methods.contains(&CiMethod::WDecorrelation) {
        log::warn!("w_decorrelation is not implemented; omitting it from the report");
        cfg.methods.retain(|m| *m != CiMethod::WDecorrelation);
    }
    let shared = shared(&cfg)?;
    let outcomes: Vec<Outcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            replicate(&cfg, &shared, r).map_err(|e| Error::Replication { replication: r, seed: cfg.seed, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let reps = cfg.replications as f64;
    let mut report = CoverageReport::default();
    for (ti, &k) in cfg.targets.iter().enumerate() {
        let label = scenario_label(&cfg, k);
        for (mi, &method) in cfg.methods.iter().enumerate() {
            for (ai, &alpha) in cfg.alphas.iter().enumerate() {
                for (slot, tail) in Tail::ALL.into_iter().enumerate() {
                    let mut covered = 0usize;
                    let mut sum = 0.0;
                    let mut sum_sq = 0.0;
                    for o in &outcomes {
                        let (hit, width) = o.hits[ti][mi][ai][slot];
                        covered += hit as usize;
                        sum += width;
                        sum_sq += width * width;
                    }
                    let p = covered as f64 / reps;
                    let mean = sum / reps;
                    let var = (sum_sq / reps - mean * mean).max(0.0);
                    report.rows.push(CoverageRow {
                        scenario: label.clone(),
                        method,
                        alpha,
                        tail,
                        coverage: p,
                        coverage_se: (p * (1.0 - p) / reps).sqrt(),
                        mean_width: mean,
                        width_se: (var / reps).sqrt(),
                        replications: cfg.replications,
                        seed: cfg.seed,
                    });
                }
            }
        }
    }
    for (r, o) in outcomes.iter().enumerate() {
        for (k, e) in o.od_standardized.iter().enumerate() {
            report.errors.push(ErrorRow {
                scenario: cfg.name.clone(),
                replication: r,
                coordinate: k + 1,
                standardized_error: *e,
            });
        }
    }
    report.replications = outcomes.into_iter().map(|o| o.summary).collect();
    let violations = report
        .replications
        .iter()
        .filter(|s| s.min_pulls.is_some_and(|m| m < crate::tuning::log_sq(cfg.n)))
        .count();
    if violations > 0 {
        log::warn!("{violations} of {} replications pulled some arm fewer than (ln n)^2 times", cfg.replications);
    }
    Ok(report)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<CoverageReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal_quantile;
    use crate::estimators::online_debias;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn near_noiseless_intervals_cover() {
        let cfg = config(
            "scenario = fixed_design\ntheta_star = 0.5, -1, 2\nn = 200\nreplications = 1\nsigma2 = 1e-16\nalphas = 0.05\n",
        );
        let report = run_experiment(&cfg).unwrap();
        assert!(report.rows.iter().all(|r| r.coverage == 1.0), "{:#?}", report.rows);
    }

    #[test]
    fn widths_match_closed_forms() {
        let cfg = config("scenario = fixed_design\ntheta_star = 0.5, -1, 2\nn = 200\nreplications = 1\nalphas = 0.05\n");
        let report = run_experiment(&cfg).unwrap();
        let (ds, theta) = simulate_replication(&cfg, 0).unwrap();
        assert_eq!(theta, cfg.theta_star);
        let tuning = TuningSchedule::general(200, 3).unwrap();
        let od = online_debias(&ds, &tuning).unwrap();
        let v = [1.0, 0.0, 0.0];
        let diag = diag_online_debias(&ds, &v, &tuning).unwrap();
        let z = normal_quantile(0.975).unwrap();
        let sigma = od.ols.sigma2_hat.sqrt();
        let od_width = 2.0 * z * diag.beta_n * sigma * (diag.v_s_inv_v() / tuning.gamma_n).sqrt();
        let ols_width = 2.0 * z * sigma * diag.v_s_inv_v().sqrt();
        let got = |m| report.row(&cfg.name, m, 0.05, Tail::TwoSided).unwrap().mean_width;
        assert!((got(CiMethod::OdDirection) - od_width).abs() <= 1e-12 * od_width);
        assert!((got(CiMethod::NaiveOls) - ols_width).abs() <= 1e-12 * ols_width);
    }

    #[test]
    fn replication_errors_carry_index_and_seed() {
        let mut cfg = config("scenario = bandit\ntheta_star = 0.3, 0.3\nn = 100\nreplications = 3\nseed = 17\n");
        cfg.schedule = ScheduleKind::Exploration;
        match run_experiment(&cfg) {
            Err(Error::Replication { seed, replication, .. }) => {
                assert_eq!(seed, 17);
                assert!(replication < 3);
            }
            other => panic!("expected a replication error, got {other:?}"),
        }
    }

    #[test]
    fn replications_match_standalone_simulation() {
        let cfg = config("scenario = ar1\ntheta_star = 0.7\nn = 150\nreplications = 4\nseed = 8\n");
        let report = run_experiment(&cfg).unwrap();
        let (ds, theta) = simulate_replication(&cfg, 2).unwrap();
        let od = online_debias(&ds, &TuningSchedule::ar1(150).unwrap()).unwrap();
        let e = od.standardized_error(&theta, od.ols.sigma2_hat)[0];
        assert_eq!(report.od_errors(0)[2], e);
    }
}
