//! Fast invariant checks shared by the `check` subcommand and the acceptance suite.
//!
//! Each check draws its own random datasets from a seed, so a failure can be
//! replayed exactly.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{AdaptiveDataset, Observation};
use crate::error::Result;
use crate::estimators::{diag_online_debias, online_debias};
use crate::linalg::{dot, Matrix, SymmetricMatrix};
use crate::rng::{stream, StreamRng};
use crate::simulators::{
    context_second_moment, run_adversarial_design, run_ar1, run_bandit, run_fixed_design, run_linear_bandit,
    sphere_contexts, sufficient_exploration_rate, BanditPolicy, LinearBandit, NoiseModel,
};
use crate::tuning::{log_sq, uniform_sphere, TuningSchedule};
use crate::weights::WeightState;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// A randomly generated adaptive run with the schedule that fits it.
#[derive(Clone, Debug)]
pub struct RandomRun {
    pub label: &'static str,
    pub dataset: AdaptiveDataset,
    pub theta_star: Vec<f64>,
    pub tuning: TuningSchedule,
}

/// The `i`-th random run for `seed`. Runs cycle through the bandit, general
/// (fixed and adversarial designs), autoregressive and exploration schedules,
/// with `d <= 5` and `n <= 2000`.
pub fn random_run(seed: u64, i: usize) -> Result<RandomRun> {
    let mut rng = stream(seed, i as u64);
    let n = rng.random_range(100..=2000usize);
    let noise = NoiseModel::gaussian(rng.random_range(0.25..2.0));
    let theta = |rng: &mut StreamRng, d: usize| -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
    match i % 5 {
        0 => {
            let d = rng.random_range(2..=5usize);
            let theta_star = theta(&mut rng, d);
            let policy = match i % 3 {
                0 => BanditPolicy::EpsGreedy { eps: rng.random_range(0.05..0.3) },
                1 => BanditPolicy::Ucb { c: 1.0 },
                _ => BanditPolicy::Thompson,
            };
            let dataset = run_bandit(policy, &theta_star, n, noise, &mut rng)?;
            Ok(RandomRun { label: "bandit", dataset, theta_star, tuning: TuningSchedule::bandit(n)? })
        }
        1 => {
            let d = rng.random_range(1..=5usize);
            let theta_star = theta(&mut rng, d);
            let rows: Vec<Vec<f64>> =
                (0..n).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
            let dataset = run_fixed_design(&rows, &theta_star, noise, &mut rng)?;
            Ok(RandomRun { label: "general", dataset, theta_star, tuning: TuningSchedule::general(n, d)? })
        }
        2 => {
            let d = rng.random_range(2..=5usize);
            let n = n - n % (d - 1);
            let run = run_adversarial_design(d, n, &mut rng)?;
            let tuning = TuningSchedule::general(n, d)?;
            Ok(RandomRun { label: "adversarial", dataset: run.dataset, theta_star: run.theta_star, tuning })
        }
        3 => {
            let theta_star = vec![rng.random_range(0.5..=1.0)];
            let dataset = run_ar1(theta_star[0], n, noise, &mut rng)?;
            Ok(RandomRun { label: "ar1", dataset, theta_star, tuning: TuningSchedule::ar1(n)? })
        }
        _ => {
            let d = rng.random_range(2..=5usize);
            let theta_star = theta(&mut rng, d);
            let contexts = sphere_contexts(20, d, &mut rng);
            let eps = sufficient_exploration_rate(&contexts, n)?;
            let g = context_second_moment(&contexts)?;
            let lb = LinearBandit { contexts, eps: vec![eps], lambda_ridge: 0.1 };
            let dataset = run_linear_bandit(&lb, &theta_star, n, noise, &mut rng)?;
            let tuning = TuningSchedule::exploration(n, lb.eps_total(n), &g)?;
            Ok(RandomRun { label: "exploration", dataset, theta_star, tuning })
        }
    }
}

/// Replays the weight recursion with prefix tracking enabled.
pub fn traced_weights(dataset: &AdaptiveDataset, tuning: &TuningSchedule) -> Result<(WeightState, SymmetricMatrix)> {
    let d = dataset.dim();
    let mut state = WeightState::new(d, tuning.gamma_n)?.with_history();
    let mut prefix = SymmetricMatrix::zeros(d);
    let mut last = SymmetricMatrix::identity(d);
    for row in dataset.rows() {
        prefix.rank_one_update(1.0, &row.x);
        last = tuning.scaling(&row.x, &prefix)?;
        state.step(&row.x, &last)?;
    }
    Ok((state, last))
}

/// Recursion identity and bias/martingale decomposition over `runs` random runs.
pub fn exact_identities(seed: u64, runs: usize) -> Result<(f64, f64)> {
    let mut worst_recursion: f64 = 0.0;
    let mut worst_decomposition: f64 = 0.0;
    for i in 0..runs {
        let run = random_run(seed, i)?;
        let fit = online_debias(&run.dataset, &run.tuning)?;
        worst_recursion = worst_recursion.max(fit.weights.recursion_identity_residual());
        let dec = fit.decompose(&run.dataset, &run.theta_star)?;
        for k in 0..dec.total.len() {
            let scale = 1.0f64.max(dec.total[k].abs());
            worst_decomposition =
                worst_decomposition.max((dec.total[k] - dec.bias[k] - dec.martingale[k]).abs() / scale);
        }
    }
    Ok((worst_recursion, worst_decomposition))
}

/// Largest gap between the direction-specific estimate and the plain
/// online-debiased coordinate on bandit data, where the rotation leaves the
/// sample covariance diagonal and the inflation factor is exactly 1.
pub fn diagonal_case_gap(seed: u64, runs: usize) -> Result<(f64, f64)> {
    let mut worst_gap: f64 = 0.0;
    let mut worst_beta: f64 = 0.0;
    for i in 0..runs {
        let run = random_run(seed, 5 * i)?;
        let fit = online_debias(&run.dataset, &run.tuning)?;
        let d = run.dataset.dim();
        for k in 0..d {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            let diag = diag_online_debias(&run.dataset, &v, &run.tuning)?;
            worst_gap = worst_gap.max((diag.estimate() - fit.theta_od[k]).abs());
            worst_beta = worst_beta.max((diag.beta_n - 1.0).abs());
        }
    }
    Ok((worst_gap, worst_beta))
}

/// Bounds that hold for every weight sequence the recursion can produce.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightBounds {
    /// `max_k ||I - W_k Z_k||_op` over all prefixes of all runs.
    pub max_prefix_delta: f64,
    /// `max ||W_n X_n Gamma_n^{-1/2}||_max` over general-schedule runs.
    pub max_wxg_general: f64,
    /// Bandit runs whose every arm reached `(ln n)^2` pulls.
    pub bandit_eligible: usize,
    /// Eligible bandit runs with `||I - W_n Z_n||_op > exp(-1 / gamma_n)`.
    pub bandit_violations: usize,
    /// Largest `||I - W_n Z_n||_op / exp(-1/gamma_n)` among eligible bandit runs.
    pub bandit_worst_ratio: f64,
}

pub fn weight_bounds(seed: u64, runs: usize) -> Result<WeightBounds> {
    let mut out = WeightBounds::default();
    for i in 0..runs {
        let run = random_run(seed, i)?;
        let (state, gamma_last) = traced_weights(&run.dataset, &run.tuning)?;
        out.max_prefix_delta = out.max_prefix_delta.max(state.max_delta_op().expect("history enabled"));
        if run.label == "general" || run.label == "adversarial" {
            let g = gamma_last.inv_sqrt()?;
            let m = state.sum_wx().matmul(g.as_matrix()).max_abs();
            out.max_wxg_general = out.max_wxg_general.max(m);
        }
        if run.label == "bandit" {
            let n = run.dataset.len();
            let counts = crate::data::sample_covariance(&run.dataset)?.s.diag();
            if counts.iter().all(|c| *c >= log_sq(n)) {
                out.bandit_eligible += 1;
                let ratio = state.delta().op_norm() / (-1.0 / run.tuning.gamma_n).exp();
                out.bandit_worst_ratio = out.bandit_worst_ratio.max(ratio);
                if ratio > 1.0 {
                    out.bandit_violations += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Orthogonality `X^T (y - X theta_ls) = 0` relative to the scale of the data.
pub fn normal_equations(seed: u64, runs: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..runs {
        let run = random_run(seed, i)?;
        let fit = crate::estimators::ols(&run.dataset)?;
        let d = run.dataset.dim();
        let mut g = vec![0.0; d];
        let mut scale: f64 = 1.0;
        for (row, r) in run.dataset.rows().iter().zip(&fit.residuals) {
            for k in 0..d {
                g[k] += row.x[k] * r;
            }
            scale = scale.max(row.y.abs() * crate::linalg::norm(&row.x));
        }
        worst = worst.max(g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (scale * run.dataset.len() as f64));
    }
    Ok(worst)
}

/// Noise-free data is recovered exactly by both estimators.
pub fn noiseless_recovery(seed: u64) -> Result<f64> {
    let mut rng = stream(seed, u64::MAX - 1);
    let d = 3;
    let theta: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut ds = AdaptiveDataset::new(d);
    for _ in 0..200 {
        let x = uniform_sphere(d, &mut rng);
        let y = dot(&x, &theta);
        ds.push(Observation::new(x, y))?;
    }
    let fit = online_debias(&ds, &TuningSchedule::general(200, d)?)?;
    let err = fit.theta_od.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(err)
}

fn identity_gap(m: &Matrix) -> f64 {
    m.sub(&Matrix::identity(m.dim())).max_abs()
}

/// The Householder basis is orthonormal with `v` as its first row.
pub fn basis_orthonormal(seed: u64) -> Result<f64> {
    let mut rng = stream(seed, u64::MAX - 2);
    let mut worst: f64 = 0.0;
    for d in 1..=6 {
        let v = uniform_sphere(d, &mut rng);
        let b = crate::linalg::householder_basis(&v);
        worst = worst.max(identity_gap(&b.matmul(&b.transpose())));
        worst = worst.max(b.row(0).iter().zip(&v).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Runs every fast check with the default sizes.
pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(CheckResult::from_result(
        "exact identities",
        exact_identities(seed, 50).map(|(rec, dec)| {
            (rec <= 1e-9 && dec <= 1e-8, format!("recursion residual {rec:.3e}, decomposition residual {dec:.3e}"))
        }),
    ));
    out.push(CheckResult::from_result(
        "diagonal direction case",
        diagonal_case_gap(seed, 10).map(|(gap, beta)| {
            (gap <= 1e-10 && beta <= 1e-12, format!("max gap {gap:.3e}, max |beta - 1| {beta:.3e}"))
        }),
    ));
    out.push(CheckResult::from_result(
        "weight bounds",
        weight_bounds(seed, 50).map(|b| {
            (
                b.max_prefix_delta <= 1.0 + 1e-10 && b.max_wxg_general <= 4.0 + 1e-8 && b.bandit_violations == 0,
                format!(
                    "max prefix ||Delta|| {:.6}, max |WXG^-1/2| {:.4}, bandit {}/{} over bound",
                    b.max_prefix_delta, b.max_wxg_general, b.bandit_violations, b.bandit_eligible
                ),
            )
        }),
    ));
    out.push(CheckResult::from_result(
        "normal equations",
        normal_equations(seed, 20).map(|g| (g <= 1e-10, format!("max relative gradient {g:.3e}"))),
    ));
    out.push(CheckResult::from_result(
        "noiseless recovery",
        noiseless_recovery(seed).map(|e| (e <= 1e-9, format!("max error {e:.3e}"))),
    ));
    out.push(CheckResult::from_result(
        "orthonormal basis",
        basis_orthonormal(seed).map(|e| (e <= 1e-12, format!("max deviation {e:.3e}"))),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_runs_cover_every_schedule() {
        let labels: Vec<&str> = (0..5).map(|i| random_run(3, i).unwrap().label).collect();
        assert_eq!(labels, ["bandit", "general", "adversarial", "ar1", "exploration"]);
        for i in 0..10 {
            let run = random_run(3, i).unwrap();
            assert!(run.dataset.dim() <= 5 && run.dataset.len() <= 2000);
        }
    }

    #[test]
    fn fast_checks_pass() {
        for c in run_checks(11) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
