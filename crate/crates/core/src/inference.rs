//! Confidence sets built on the estimators, plus the naive baselines they
//! are compared against and the assumption diagnostics of a fit.

use std::fmt;

use crate::data::{sample_covariance, AdaptiveDataset};
use crate::distributions::{chi2_quantile, normal_quantile};
use crate::error::{Error, Result};
use crate::estimators::{DiagOdFit, OdFit, OlsFit};
use crate::linalg::{dot, Matrix, SymmetricMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CiMethod {
    OdDirection,
    /// Gaussian interval around least squares; invalid under adaptive sampling.
    NaiveOls,
    /// Gaussian interval around online debiasing that ignores the off-diagonal
    /// structure of `S_n`; only valid in the diagonal case.
    NaiveOd,
    Concentration,
    WDecorrelation,
}

impl CiMethod {
    pub const ALL: [CiMethod; 5] =
        [Self::OdDirection, Self::NaiveOls, Self::NaiveOd, Self::Concentration, Self::WDecorrelation];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OdDirection => "od_direction",
            Self::NaiveOls => "naive_ols",
            Self::NaiveOd => "naive_od",
            Self::Concentration => "concentration",
            Self::WDecorrelation => "w_decorrelation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }

    /// Whether the interval is justified when the design is adaptive.
    pub fn valid_under_adaptivity(self) -> bool {
        matches!(self, Self::OdDirection | Self::Concentration)
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side(s) of the estimate an interval bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tail {
    /// `(-inf, center + z_{1-alpha} se]`: guards against the estimate landing
    /// in the lower tail of its sampling distribution.
    Lower,
    /// `[center - z_{1-alpha} se, inf)`.
    Upper,
    TwoSided,
}

impl Tail {
    pub const ALL: [Tail; 3] = [Self::Lower, Self::Upper, Self::TwoSided];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
            Self::TwoSided => "two-sided",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tail {s:?}")))
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub tail: Tail,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    /// `center -/+ margin` on the requested side(s).
    pub fn around(center: f64, margin: f64, level: f64, tail: Tail, method: CiMethod) -> Self {
        let (lo, hi) = match tail {
            Tail::Lower => (f64::NEG_INFINITY, center + margin),
            Tail::Upper => (center - margin, f64::INFINITY),
            Tail::TwoSided => (center - margin, center + margin),
        };
        Self { lo, hi, center, level, tail, method }
    }

    /// Interval from a standard error using Gaussian quantiles.
    pub fn gaussian(center: f64, se: f64, alpha: f64, tail: Tail, method: CiMethod) -> Result<Self> {
        check_alpha(alpha)?;
        let z = match tail {
            Tail::TwoSided => normal_quantile(1.0 - alpha / 2.0)?,
            Tail::Lower | Tail::Upper => normal_quantile(1.0 - alpha)?,
        };
        Ok(Self::around(center, z * se, 1.0 - alpha, tail, method))
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    /// Full length for two-sided intervals, distance from the center to the
    /// finite end for one-sided ones.
    pub fn width(&self) -> f64 {
        match self.tail {
            Tail::TwoSided => self.hi - self.lo,
            Tail::Lower => self.hi - self.center,
            Tail::Upper => self.center - self.lo,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")))
    }
}

/// The ellipsoid `{theta : (gamma/sigma2) (c - theta)^T S (c - theta) <= radius2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRegion {
    pub center: Vec<f64>,
    pub shape: SymmetricMatrix,
    pub radius2: f64,
}

impl ConfidenceRegion {
    pub fn statistic(&self, theta: &[f64]) -> f64 {
        let diff: Vec<f64> = self.center.iter().zip(theta).map(|(a, b)| a - b).collect();
        self.shape.quad_form(&diff)
    }

    /// Closed region: the boundary is included.
    pub fn contains(&self, theta: &[f64]) -> bool {
        self.statistic(theta) <= self.radius2
    }
}

pub fn confidence_region(fit: &OdFit, sigma2_hat: f64, alpha: f64) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    check_sigma2(sigma2_hat)?;
    let d = fit.theta_od.len();
    Ok(ConfidenceRegion {
        center: fit.theta_od.clone(),
        shape: fit.ols.cov.s.scale(fit.gamma_n / sigma2_hat),
        radius2: chi2_quantile(d, 1.0 - alpha)?,
    })
}

/// Interval for `v^T theta*` from the direction-rotated estimator:
/// `e_1^T theta_diag -/+ (beta sigma / sqrt(gamma)) sqrt(v^T S^{-1} v) z`.
pub fn ci_direction(fit: &DiagOdFit, sigma2_hat: f64, alpha: f64, tail: Tail) -> Result<ConfidenceInterval> {
    check_sigma2(sigma2_hat)?;
    let se = fit.beta_n * (sigma2_hat * fit.v_s_inv_v() / fit.gamma_n).sqrt();
    ConfidenceInterval::gaussian(fit.estimate(), se, alpha, tail, CiMethod::OdDirection)
}

pub fn ci_naive_ols(fit: &OlsFit, sigma2_hat: f64, alpha: f64, v: &[f64], tail: Tail) -> Result<ConfidenceInterval> {
    check_sigma2(sigma2_hat)?;
    let vsv = fit.cov.s.inverse()?.quad_form(v);
    let se = (sigma2_hat * vsv).sqrt();
    ConfidenceInterval::gaussian(dot(v, &fit.theta_ls), se, alpha, tail, CiMethod::NaiveOls)
}

/// `v^T theta_od -/+ sigma sqrt(v^T S^{-1} v / gamma) z`.
pub fn ci_naive_od(fit: &OdFit, sigma2_hat: f64, alpha: f64, v: &[f64], tail: Tail) -> Result<ConfidenceInterval> {
    check_sigma2(sigma2_hat)?;
    let vsv = fit.ols.cov.s.inverse()?.quad_form(v);
    let se = (sigma2_hat * vsv / fit.gamma_n).sqrt();
    ConfidenceInterval::gaussian(dot(v, &fit.theta_od), se, alpha, tail, CiMethod::NaiveOd)
}

/// Ridge quantities behind the concentration interval, reusable across
/// confidence levels and directions.
#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub theta_ridge: Vec<f64>,
    pub lambda_ridge: f64,
    /// `Vbar^{-1}` with `Vbar = lambda I + S_n`.
    pub vbar_inv: SymmetricMatrix,
    /// `ln(det(Vbar)^{1/2} lambda^{-d/2})`.
    pub log_det_ratio: f64,
}

impl RidgeFit {
    pub fn new(dataset: &AdaptiveDataset, lambda_ridge: f64) -> Result<Self> {
        if !(lambda_ridge > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda_ridge must be positive, got {lambda_ridge}")));
        }
        let d = dataset.dim();
        let s = if dataset.is_empty() { SymmetricMatrix::zeros(d) } else { sample_covariance(dataset)?.s };
        let vbar = s.add(&SymmetricMatrix::identity(d).scale(lambda_ridge));
        let mut xty = vec![0.0; d];
        for row in dataset.rows() {
            for (a, x) in xty.iter_mut().zip(&row.x) {
                *a += x * row.y;
            }
        }
        Ok(Self {
            theta_ridge: vbar.solve(&xty)?,
            lambda_ridge,
            vbar_inv: vbar.inverse()?,
            log_det_ratio: 0.5 * vbar.log_det()? - 0.5 * d as f64 * lambda_ridge.ln(),
        })
    }

    /// `v^T theta_ridge -/+ |v|_{Vbar^{-1}} (sigma sqrt(2 ln(det(Vbar)^{1/2} lambda^{-d/2} / delta)) + sqrt(lambda) theta_bound)`.
    pub fn interval(&self, delta: f64, v: &[f64], sigma: f64, theta_bound: f64, tail: Tail) -> Result<ConfidenceInterval> {
        check_alpha(delta)?;
        let radius = sigma * (2.0 * (self.log_det_ratio - delta.ln())).sqrt() + self.lambda_ridge.sqrt() * theta_bound;
        let v_norm = self.vbar_inv.quad_form(v).sqrt();
        Ok(ConfidenceInterval::around(dot(v, &self.theta_ridge), v_norm * radius, 1.0 - delta, tail, CiMethod::Concentration))
    }
}

/// Self-normalized concentration interval around the ridge estimate; see
/// [`RidgeFit::interval`].
pub fn ci_concentration(
    dataset: &AdaptiveDataset,
    lambda_ridge: f64,
    delta: f64,
    v: &[f64],
    sigma: f64,
    theta_bound: f64,
    tail: Tail,
) -> Result<ConfidenceInterval> {
    RidgeFit::new(dataset, lambda_ridge)?.interval(delta, v, sigma, theta_bound, tail)
}

/// Placeholder for the W-decorrelation baseline so report layouts stay fixed.
pub fn ci_w_decorrelation(_dataset: &AdaptiveDataset, _alpha: f64, _v: &[f64]) -> Result<ConfidenceInterval> {
    Err(Error::NotImplemented("W-decorrelation"))
}

/// Finite-sample proxies for the assumptions behind the Gaussian limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionDiagnostics {
    pub lambda_min_s: f64,
    /// `ln(lambda_max(S) / lambda_min(S))`.
    pub log_condition: f64,
    /// `max_i |z_i|^2 / gamma_n` (negligibility).
    pub max_z_ratio: f64,
    /// `sqrt(gamma_n ln lambda_max(S)) ||I - W X S^{-1/2}||_op` (vanishing bias).
    pub bias_factor: f64,
    /// `||I - sum w_i x_i^T Gamma_i^{-1/2}||_op` (variance stability).
    pub variance_stability: f64,
    /// `||W X Gamma^{-1/2}||_max`, entry-wise.
    pub wz_max: f64,
    /// `exp(-lambda_min(sum z z^T) / gamma_n)`.
    pub commutative_bound: f64,
    /// Residual of `I - gamma sum w w^T = sum |z|^2 w w^T + Delta Delta^T`.
    pub recursion_residual: f64,
}

pub fn diagnostics_assumptions(fit: &OdFit) -> Result<AssumptionDiagnostics> {
    let s = &fit.ols.cov.s;
    let eig = s.eigen();
    let (lmin, lmax) = (eig.min_value(), eig.max_value());
    let d = s.dim();
    let wxs = fit.weights.sum_wx().matmul(s.inv_sqrt()?.as_matrix());
    let bias_op = Matrix::identity(d).sub(&wxs).op_norm();
    Ok(AssumptionDiagnostics {
        lambda_min_s: lmin,
        log_condition: (lmax / lmin).ln(),
        max_z_ratio: fit.weights.max_z_ratio(),
        bias_factor: (fit.gamma_n * lmax.ln().max(0.0)).sqrt() * bias_op,
        variance_stability: fit.weights.delta().op_norm(),
        wz_max: fit.weights.sum_wz().max_abs(),
        commutative_bound: fit.weights.commutative_bound(),
        recursion_residual: fit.weights.recursion_identity_residual(),
    })
}
