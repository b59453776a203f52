//! Regularizer and scaling-matrix schedules for the weight recursion.
//!
//! A schedule is evaluated row by row. At row `i` it sees the covariate
//! `x_i` and the running covariance `S_i = sum_{j <= i} x_j x_j^T`; both are
//! known before `y_i` is observed, so every `Gamma_i` is predictable.
//! Logarithms are natural throughout.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{AdaptiveDataset, Observation};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricMatrix};

/// `1 / (ln n * ln ln n)`.
pub fn gamma_default(n: usize) -> Result<f64> {
    if n < 16 {
        return Err(Error::SampleTooSmall(n));
    }
    let ln = (n as f64).ln();
    Ok(1.0 / (ln * ln.ln()))
}

/// `(ln n)^2`, the pull-count floor used by the bandit and AR schedules.
pub fn log_sq(n: usize) -> f64 {
    let ln = (n as f64).ln();
    ln * ln
}

/// Element-wise `max{S_i, (ln n)^2 I}` for diagonal (arm-count) `S_i`.
pub fn scaling_bandit(s_prefix: &SymmetricMatrix, n: usize) -> Result<SymmetricMatrix> {
    if !s_prefix.is_diagonal() {
        return Err(Error::NonDiagonalPrefix);
    }
    let floor = log_sq(n);
    Ok(SymmetricMatrix::from_diag(&s_prefix.diag().iter().map(|c| c.max(floor)).collect::<Vec<_>>()))
}

/// Element-wise `max{diag(S_i^{-1})^{-1}, L}`.
pub fn scaling_general(s_prefix: &SymmetricMatrix, lower: &[f64]) -> Result<SymmetricMatrix> {
    check_lower(s_prefix.dim(), lower)?;
    let inv = s_prefix.inverse().map_err(|_| Error::SingularPrefix)?;
    let diag: Vec<f64> = inv.diag().iter().zip(lower).map(|(p, l)| (1.0 / p).max(*l)).collect();
    Ok(SymmetricMatrix::from_diag(&diag))
}

/// `max{(ln n)^2 y_{i-1}^2, sum_{j <= i-1} y_j^2}` given `y_1, ..., y_{i-1}`.
///
/// With the start value `y_0 = 0` the first step (empty history) yields 0.
pub fn scaling_ar(history: &[f64], n: usize) -> f64 {
    let last = history.last().copied().unwrap_or(0.0);
    let sum_sq: f64 = history.iter().map(|y| y * y).sum();
    (log_sq(n) * last * last).max(sum_sq)
}

/// The constant scaling `eps_total * G`.
pub fn scaling_exploration(eps_total: f64, g: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if !(eps_total > 0.0) {
        return Err(Error::InvalidArgument(format!("exploration total must be positive, got {eps_total}")));
    }
    if !(g.min_eigenvalue() > 0.0) {
        return Err(Error::ExplorationNotPd);
    }
    Ok(g.scale(eps_total))
}

/// Both sides of the sufficient-exploration condition
/// `sum eps_i >= E[max |x|^2] (ln n)^2 / lambda_min(G)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationCheck {
    pub eps_total: f64,
    pub required: f64,
}

impl ExplorationCheck {
    pub fn new(eps_total: f64, max_sq_norm: f64, g: &SymmetricMatrix, n: usize) -> Self {
        let required = max_sq_norm * log_sq(n) / g.min_eigenvalue();
        Self { eps_total, required }
    }

    pub fn satisfied(&self) -> bool {
        self.eps_total >= self.required
    }
}

/// Number of rows appended by [`augment_dataset`]: `ceil((ln n)^2)`.
pub fn augmentation_size(n: usize) -> usize {
    log_sq(n).ceil() as usize
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn uniform_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let nrm = crate::linalg::norm(&v);
        if nrm > 1e-12 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// Appends `ceil((ln n)^2)` rows with covariates uniform on the unit sphere;
/// `respond` produces each new response.
pub fn augment_dataset<R, F>(dataset: &AdaptiveDataset, rng: &mut R, mut respond: F) -> Result<AdaptiveDataset>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut R) -> f64,
{
    let extra = augmentation_size(dataset.len().max(1));
    let mut out = dataset.clone();
    for _ in 0..extra {
        let x = uniform_sphere(dataset.dim(), rng);
        let y = respond(&x, rng);
        out.push(Observation::new(x, y))?;
    }
    out.meta.insert("augmented_rows".into(), extra.to_string());
    Ok(out)
}

fn check_lower(dim: usize, lower: &[f64]) -> Result<()> {
    if lower.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: lower.len() });
    }
    if lower.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidArgument("L_n entries must be nonnegative".into()));
    }
    Ok(())
}

/// How `Gamma_i` is produced from `(x_i, S_i)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalingRule {
    /// `max{S_i, floor I}` on arm counts.
    Bandit { floor: f64 },
    /// `max{diag(S_i^{-1})^{-1}, L}` with diagonal `L`.
    General { lower: Vec<f64> },
    /// Scalar `max{floor x_i^2, S_i}` for `x_i = y_{i-1}`.
    Ar1 { floor: f64 },
    /// The same matrix at every step (exploration tuning, known stable designs).
    Constant { matrix: SymmetricMatrix },
}

/// `gamma_n` together with a rule for `Gamma_{i,n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuningSchedule {
    pub gamma_n: f64,
    pub rule: ScalingRule,
    pub label: String,
}

/// Schedule names accepted by configs and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Bandit,
    General,
    Ar1,
    Exploration,
}

impl ScheduleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bandit" => Ok(Self::Bandit),
            "general" => Ok(Self::General),
            "ar1" => Ok(Self::Ar1),
            "exploration" => Ok(Self::Exploration),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule {other:?} (expected bandit | general | ar1 | exploration)"
            ))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bandit => "bandit",
            Self::General => "general",
            Self::Ar1 => "ar1",
            Self::Exploration => "exploration",
        })
    }
}

impl TuningSchedule {
    pub fn bandit(n: usize) -> Result<Self> {
        Ok(Self { gamma_n: gamma_default(n)?, rule: ScalingRule::Bandit { floor: log_sq(n) }, label: "bandit".into() })
    }

    /// General schedule with the default `L_n = (ln ln n / gamma_n) I`.
    pub fn general(n: usize, dim: usize) -> Result<Self> {
        let gamma_n = gamma_default(n)?;
        let l = (n as f64).ln().ln() / gamma_n;
        Self::general_with(gamma_n, vec![l; dim])
    }

    pub fn general_with(gamma_n: f64, lower: Vec<f64>) -> Result<Self> {
        check_lower(lower.len(), &lower)?;
        Ok(Self { gamma_n, rule: ScalingRule::General { lower }, label: "general".into() })
    }

    pub fn ar1(n: usize) -> Result<Self> {
        Ok(Self { gamma_n: gamma_default(n)?, rule: ScalingRule::Ar1 { floor: log_sq(n) }, label: "ar1".into() })
    }

    pub fn exploration(n: usize, eps_total: f64, g: &SymmetricMatrix) -> Result<Self> {
        Ok(Self {
            gamma_n: gamma_default(n)?,
            rule: ScalingRule::Constant { matrix: scaling_exploration(eps_total, g)? },
            label: "exploration".into(),
        })
    }

    /// Fixed `gamma_n` and `Gamma_i = matrix` for every `i`.
    pub fn constant(gamma_n: f64, matrix: SymmetricMatrix) -> Self {
        Self { gamma_n, rule: ScalingRule::Constant { matrix }, label: "constant".into() }
    }

    /// The schedule to use on covariates rotated by the orthonormal `basis`.
    /// Count-based rules are recomputed from rotated data; constant matrices
    /// are carried into the new basis.
    pub fn rotated(&self, basis: &Matrix) -> Self {
        let rule = match &self.rule {
            ScalingRule::Constant { matrix } => ScalingRule::Constant { matrix: matrix.congruence(basis) },
            other => other.clone(),
        };
        Self { gamma_n: self.gamma_n, rule, label: self.label.clone() }
    }

    /// `Gamma_i` from the current covariate and `S_i` (which already includes `x_i`).
    pub fn scaling(&self, x: &[f64], s_i: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        match &self.rule {
            ScalingRule::Bandit { floor } => {
                if !s_i.is_diagonal() {
                    return Err(Error::NonDiagonalPrefix);
                }
                Ok(SymmetricMatrix::from_diag(&s_i.diag().iter().map(|c| c.max(*floor)).collect::<Vec<_>>()))
            }
            ScalingRule::General { lower } => general_rule(s_i, lower),
            ScalingRule::Ar1 { floor } => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: x.len() });
                }
                let prev = x[0];
                Ok(SymmetricMatrix::from_diag(&[(floor * prev * prev).max(s_i[(0, 0)])]))
            }
            ScalingRule::Constant { matrix } => Ok(matrix.clone()),
        }
    }
}

/// [`scaling_general`] for use inside a run. Coordinates whose count `S_kk`
/// does not exceed `L_kk` take `L_kk` directly (the Schur complement
/// `1/(S^{-1})_kk` never exceeds `S_kk`). Otherwise a singular early prefix
/// is read as the limit of `S + eta I`.
fn general_rule(s_i: &SymmetricMatrix, lower: &[f64]) -> Result<SymmetricMatrix> {
    check_lower(s_i.dim(), lower)?;
    let diag = s_i.diag();
    if diag.iter().zip(lower).all(|(s, l)| s <= l) {
        return Ok(SymmetricMatrix::from_diag(lower));
    }
    let inv = match s_i.inverse() {
        Ok(inv) => inv,
        Err(_) => {
            let eta = 1e-9 * s_i.as_matrix().trace().max(1.0);
            s_i.add(&SymmetricMatrix::identity(s_i.dim()).scale(eta)).inverse()?
        }
    };
    let out: Vec<f64> = inv
        .diag()
        .iter()
        .zip(diag.iter().zip(lower))
        .map(|(p, (s, l))| if s <= l { *l } else { (1.0 / p).max(*l) })
        .collect();
    Ok(SymmetricMatrix::from_diag(&out))
}
