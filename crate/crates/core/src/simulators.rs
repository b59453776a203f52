//! Adaptive data-collection processes: multi-armed bandits, a first-order
//! autoregression, an epsilon-greedy linear bandit, a design built to defeat
//! any estimator, and plain fixed designs.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{AdaptiveDataset, Observation};
use crate::error::{Error, Result};
use crate::linalg::{dot, SymmetricMatrix};
use crate::tuning::{log_sq, uniform_sphere};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[-sqrt(3) sigma, sqrt(3) sigma]`.
    ScaledUniform,
}

/// Centered noise with conditional variance `sigma2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma2: f64) -> Self {
        Self { kind: NoiseKind::Gaussian, sigma2 }
    }

    pub fn scaled_uniform(sigma2: f64) -> Self {
        Self { kind: NoiseKind::ScaledUniform, sigma2 }
    }

    pub fn parse(kind: &str, sigma2: f64) -> Result<Self> {
        match kind {
            "gaussian" => Ok(Self::gaussian(sigma2)),
            "scaled-uniform" => Ok(Self::scaled_uniform(sigma2)),
            other => Err(Error::InvalidArgument(format!("unknown noise kind {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sigma = self.sigma2.sqrt();
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseKind::ScaledUniform => sigma * 3f64.sqrt() * rng.random_range(-1.0..1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BanditPolicy {
    EpsGreedy { eps: f64 },
    /// Index `mean_k + c sqrt(2 ln i / N_k)`.
    Ucb { c: f64 },
    /// Gaussian posterior sampling with an `N(0, 1)` prior and unit noise variance.
    Thompson,
}

impl fmt::Display for BanditPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EpsGreedy { eps } => write!(f, "eps_greedy({eps})"),
            Self::Ucb { c } => write!(f, "ucb({c})"),
            Self::Thompson => f.write_str("thompson"),
        }
    }
}

/// First index attaining the maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn basis(d: usize, k: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[k] = 1.0;
    x
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

/// Multi-armed bandit with one forced pull per arm in rounds `1..=d`.
pub fn run_bandit<R: Rng + ?Sized>(
    policy: BanditPolicy,
    theta_star: &[f64],
    n: usize,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<AdaptiveDataset> {
    let d = theta_star.len();
    if d == 0 {
        return Err(Error::InvalidArgument("bandit needs at least one arm".into()));
    }
    if n < d {
        return Err(Error::TooFewPulls);
    }
    let mut counts = vec![0usize; d];
    let mut sums = vec![0.0; d];
    let mut ds = AdaptiveDataset::new(d);
    for i in 1..=n {
        let arm = if i <= d {
            i - 1
        } else {
            match policy {
                BanditPolicy::EpsGreedy { eps } => {
                    if rng.random::<f64>() < eps {
                        rng.random_range(0..d)
                    } else {
                        argmax((0..d).map(|k| sums[k] / counts[k] as f64))
                    }
                }
                BanditPolicy::Ucb { c } => {
                    let li = (i as f64).ln();
                    argmax((0..d).map(|k| sums[k] / counts[k] as f64 + c * (2.0 * li / counts[k] as f64).sqrt()))
                }
                BanditPolicy::Thompson => {
                    let draws: Vec<f64> = (0..d)
                        .map(|k| {
                            let prec = 1.0 + counts[k] as f64;
                            let z: f64 = StandardNormal.sample(rng);
                            sums[k] / prec + z / prec.sqrt()
                        })
                        .collect();
                    argmax(draws)
                }
            }
        };
        let y = theta_star[arm] + noise.sample(rng);
        counts[arm] += 1;
        sums[arm] += y;
        ds.push(Observation::new(basis(d, arm), y))?;
    }
    ds.meta.insert("scenario".into(), "bandit".into());
    ds.meta.insert("policy".into(), policy.to_string());
    ds.meta.insert("theta_star".into(), fmt_vec(theta_star));
    Ok(ds)
}

/// `y_i = theta y_{i-1} + eps_i` from `y_0 = 0`; row `i` is `(y_{i-1}, y_i)`.
pub fn run_ar1<R: Rng + ?Sized>(theta_star: f64, n: usize, noise: NoiseModel, rng: &mut R) -> Result<AdaptiveDataset> {
    let innovations: Vec<f64> = (0..n).map(|_| noise.sample(rng)).collect();
    ar1_from_innovations(theta_star, &innovations)
}

/// The autoregression driven by the given innovations.
pub fn ar1_from_innovations(theta_star: f64, innovations: &[f64]) -> Result<AdaptiveDataset> {
    if !(theta_star > -1.0 && theta_star <= 1.0) {
        return Err(Error::InvalidArgument(format!("AR coefficient must lie in (-1, 1], got {theta_star}")));
    }
    let mut ds = AdaptiveDataset::new(1);
    let mut prev = 0.0;
    for e in innovations {
        let y = theta_star * prev + e;
        ds.push(Observation::new(vec![prev], y))?;
        prev = y;
    }
    ds.meta.insert("scenario".into(), "ar1".into());
    ds.meta.insert("theta_star".into(), format!("{theta_star:?}"));
    Ok(ds)
}

/// `k` contexts drawn uniformly from the unit sphere in `R^d`.
pub fn sphere_contexts<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..k).map(|_| uniform_sphere(d, rng)).collect()
}

/// `G = (1/|A|) sum a a^T`, the second moment of a uniform context.
pub fn context_second_moment(contexts: &[Vec<f64>]) -> Result<SymmetricMatrix> {
    let first = contexts.first().ok_or(Error::EmptyContexts)?;
    let mut g = SymmetricMatrix::zeros(first.len());
    for a in contexts {
        g.rank_one_update(1.0 / contexts.len() as f64, a);
    }
    Ok(g)
}

/// Smallest constant exploration rate meeting
/// `n eps >= max |a|^2 (ln n)^2 / lambda_min(G)`, capped at 1.
pub fn sufficient_exploration_rate(contexts: &[Vec<f64>], n: usize) -> Result<f64> {
    let g = context_second_moment(contexts)?;
    let lmin = g.min_eigenvalue();
    if !(lmin > 0.0) {
        return Err(Error::ExplorationNotPd);
    }
    let k2 = contexts.iter().map(|a| dot(a, a)).fold(0.0, f64::max);
    Ok((k2 * log_sq(n) / (lmin * n as f64)).min(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearBandit {
    pub contexts: Vec<Vec<f64>>,
    /// Exploration probability per round (the last entry repeats).
    pub eps: Vec<f64>,
    pub lambda_ridge: f64,
}

impl LinearBandit {
    pub fn eps_total(&self, n: usize) -> f64 {
        (0..n).map(|i| self.eps_at(i)).sum()
    }

    fn eps_at(&self, i: usize) -> f64 {
        self.eps.get(i).or(self.eps.last()).copied().unwrap_or(0.0)
    }
}

/// Greedy on the ridge estimate, exploring uniformly over the contexts with
/// probability `eps_i`.
pub fn run_linear_bandit<R: Rng + ?Sized>(
    bandit: &LinearBandit,
    theta_star: &[f64],
    n: usize,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<AdaptiveDataset> {
    let first = bandit.contexts.first().ok_or(Error::EmptyContexts)?;
    let d = first.len();
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta_star.len() });
    }
    if !(bandit.lambda_ridge > 0.0) {
        return Err(Error::InvalidArgument("lambda_ridge must be positive".into()));
    }
    let mut vbar = SymmetricMatrix::identity(d).scale(bandit.lambda_ridge);
    let mut xty = vec![0.0; d];
    let mut ds = AdaptiveDataset::new(d);
    for i in 0..n {
        let k = if rng.random::<f64>() < bandit.eps_at(i) {
            rng.random_range(0..bandit.contexts.len())
        } else {
            let theta = vbar.solve(&xty)?;
            argmax(bandit.contexts.iter().map(|a| dot(a, &theta)))
        };
        let x = bandit.contexts[k].clone();
        let y = dot(&x, theta_star) + noise.sample(rng);
        vbar.rank_one_update(1.0, &x);
        for (b, xi) in xty.iter_mut().zip(&x) {
            *b += xi * y;
        }
        ds.push(Observation::new(x, y))?;
    }
    ds.meta.insert("scenario".into(), "linear_bandit".into());
    ds.meta.insert("theta_star".into(), fmt_vec(theta_star));
    ds.meta.insert("lambda_ridge".into(), format!("{:?}", bandit.lambda_ridge));
    Ok(ds)
}

#[derive(Clone, Debug)]
pub struct AdversarialRun {
    pub dataset: AdaptiveDataset,
    pub theta_star: Vec<f64>,
    /// Whether the prior drew `theta* = 0`.
    pub theta_is_zero: bool,
}

/// `b_v = v^{-1/4} / sqrt(d)`.
pub fn adversarial_b(v: usize, d: usize) -> f64 {
    (v as f64).powf(-0.25) / (d as f64).sqrt()
}

/// Round-robin design in which coordinate `u` at its `v`-th visit gets
/// `x = b_v e_u + a_{u,v} e_d` with `a_{u,v} = -b_v m_{u,v-1} / d_{v-1}`,
/// `m_{u,v} = sum_{w <= v} b_w (y_{u,w} - a_{u,w})` and `d_v = 1 + sum_{w <= v} b_w^2`.
/// Unit Gaussian noise. The prior puts mass 1/2 on `theta* = 0`; otherwise
/// the first `d - 1` coordinates are standard normal and the last is 1.
pub fn run_adversarial_design<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<AdversarialRun> {
    if d < 2 {
        return Err(Error::InvalidArgument("adversarial design needs d >= 2".into()));
    }
    if !n.is_multiple_of(d - 1) {
        return Err(Error::NotDivisible { n, d_minus_one: d - 1 });
    }
    let theta_is_zero = rng.random::<f64>() < 0.5;
    let theta_star: Vec<f64> = if theta_is_zero {
        vec![0.0; d]
    } else {
        (0..d).map(|k| if k + 1 == d { 1.0 } else { StandardNormal.sample(rng) }).collect()
    };
    let mut m = vec![0.0; d - 1];
    let mut d_prev = 1.0;
    let mut ds = AdaptiveDataset::new(d);
    for i in 1..=n {
        let u = (i - 1) % (d - 1);
        let v = (i + d - 2) / (d - 1);
        let b = adversarial_b(v, d);
        let a = -b * m[u] / d_prev;
        let mut x = vec![0.0; d];
        x[u] = b;
        x[d - 1] = a;
        let eps: f64 = StandardNormal.sample(rng);
        let y = dot(&x, &theta_star) + eps;
        m[u] += b * (y - a);
        if u == d - 2 {
            d_prev += b * b;
        }
        ds.push(Observation::new(x, y))?;
    }
    ds.meta.insert("scenario".into(), "adversarial".into());
    ds.meta.insert("theta_star".into(), fmt_vec(&theta_star));
    Ok(AdversarialRun { dataset: ds, theta_star, theta_is_zero })
}

/// `1 / (S^{-1})_{dd}`, the information about the last coordinate.
pub fn last_coordinate_information(dataset: &AdaptiveDataset) -> Result<f64> {
    let s = crate::data::sample_covariance(dataset)?.s;
    let d = s.dim();
    let mut e = vec![0.0; d];
    e[d - 1] = 1.0;
    let col = s.solve(&e).map_err(|_| Error::SingularDesign)?;
    Ok(1.0 / col[d - 1])
}

/// Responses for fixed covariates.
pub fn run_fixed_design<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    theta_star: &[f64],
    noise: NoiseModel,
    rng: &mut R,
) -> Result<AdaptiveDataset> {
    let mut ds = AdaptiveDataset::new(theta_star.len());
    for x in rows {
        let y = dot(x, theta_star) + noise.sample(rng);
        ds.push(Observation::new(x.clone(), y))?;
    }
    ds.meta.insert("scenario".into(), "fixed_design".into());
    ds.meta.insert("theta_star".into(), fmt_vec(theta_star));
    Ok(ds)
}

/// Writes `path` in the dataset CSV format and `path.json` with the metadata.
pub fn export_dataset(dataset: &AdaptiveDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    dataset.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = std::path::PathBuf::from(sidecar);
    let text = serde_json::to_string_pretty(&dataset.meta).expect("string map serializes");
    std::fs::write(&sidecar, text + "\n").map_err(|e| Error::io(&sidecar, e))
}
