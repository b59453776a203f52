//! Least squares, online debiasing and its direction-rotated variant.

use crate::data::{arm_of, sample_covariance, AdaptiveDataset, SampleCovariance};
use crate::error::{Error, Result};
use crate::linalg::{dot, householder_basis, norm, Matrix, SymmetricMatrix};
use crate::tuning::{gamma_default, TuningSchedule};
use crate::weights::WeightState;

#[derive(Clone, Debug)]
pub struct OlsFit {
    pub theta_ls: Vec<f64>,
    pub cov: SampleCovariance,
    /// `y_i - x_i^T theta_ls` in row order.
    pub residuals: Vec<f64>,
    /// Mean squared residual.
    pub sigma2_hat: f64,
    sigma2_override: Option<f64>,
}

impl OlsFit {
    /// Replaces the residual mean square by an externally supplied noise variance.
    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2_override = Some(sigma2);
        self
    }

    /// The noise variance used for inference.
    pub fn sigma2(&self) -> f64 {
        self.sigma2_override.unwrap_or(self.sigma2_hat)
    }

    pub fn dim(&self) -> usize {
        self.theta_ls.len()
    }
}

pub fn ols(dataset: &AdaptiveDataset) -> Result<OlsFit> {
    let cov = sample_covariance(dataset)?;
    let mut xty = vec![0.0; dataset.dim()];
    for row in dataset.rows() {
        for (a, x) in xty.iter_mut().zip(&row.x) {
            *a += x * row.y;
        }
    }
    let theta_ls = cov.s.solve(&xty).map_err(|e| match e {
        Error::SingularCovariance => Error::SingularDesign,
        other => other,
    })?;
    let residuals: Vec<f64> = dataset.rows().iter().map(|r| r.y - dot(&r.x, &theta_ls)).collect();
    let sigma2_hat = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
    Ok(OlsFit { theta_ls, cov, residuals, sigma2_hat, sigma2_override: None })
}

/// Runs the weight recursion over `dataset` in row order, feeding `residuals`
/// into `sum w_i r_i`. Returns the final state and every `w_i`.
pub fn run_weights(
    dataset: &AdaptiveDataset,
    tuning: &TuningSchedule,
    residuals: &[f64],
) -> Result<(WeightState, Vec<Vec<f64>>)> {
    let d = dataset.dim();
    let mut state = WeightState::new(d, tuning.gamma_n)?;
    let mut prefix = SymmetricMatrix::zeros(d);
    let mut ws = Vec::with_capacity(dataset.len());
    for (row, r) in dataset.rows().iter().zip(residuals) {
        prefix.rank_one_update(1.0, &row.x);
        let scaling = tuning.scaling(&row.x, &prefix)?;
        let w = state.step(&row.x, &scaling)?;
        state.accumulate(&w, *r);
        ws.push(w);
    }
    Ok((state, ws))
}

#[derive(Clone, Debug)]
pub struct OdFit {
    pub theta_od: Vec<f64>,
    pub gamma_n: f64,
    /// `S_n^{1/2}`.
    pub s_half: SymmetricMatrix,
    pub ols: OlsFit,
    pub weights: WeightState,
    /// `w_1, ..., w_n`.
    pub w: Vec<Vec<f64>>,
}

/// `sqrt(gamma) S^{1/2} (theta_od - theta*) = bias + martingale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// `sqrt(gamma) (I - W X S^{-1/2}) S^{1/2} (theta_ls - theta*)`.
    pub bias: Vec<f64>,
    /// `sqrt(gamma) sum w_i eps_i` with `eps_i = y_i - x_i^T theta*`.
    pub martingale: Vec<f64>,
    /// `sqrt(gamma) S^{1/2} (theta_od - theta*)`.
    pub total: Vec<f64>,
}

impl OdFit {
    /// `sqrt(gamma_n / sigma2) S^{1/2} (theta_od - theta)`.
    pub fn standardized_error(&self, theta: &[f64], sigma2: f64) -> Vec<f64> {
        let diff: Vec<f64> = self.theta_od.iter().zip(theta).map(|(a, b)| a - b).collect();
        let k = (self.gamma_n / sigma2).sqrt();
        self.s_half.mul_vec(&diff).into_iter().map(|v| k * v).collect()
    }

    /// Bias / martingale split against a known true parameter.
    pub fn decompose(&self, dataset: &AdaptiveDataset, theta_star: &[f64]) -> Result<Decomposition> {
        let d = self.theta_od.len();
        if theta_star.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta_star.len() });
        }
        let sg = self.gamma_n.sqrt();
        let s_inv_half = self.ols.cov.s.inv_sqrt()?;
        let err_ls: Vec<f64> = self.ols.theta_ls.iter().zip(theta_star).map(|(a, b)| a - b).collect();
        let scaled = self.s_half.mul_vec(&err_ls);
        let wxs = self.weights.sum_wx().matmul(s_inv_half.as_matrix());
        let proj = wxs.mul_vec(&scaled);
        let bias: Vec<f64> = scaled.iter().zip(&proj).map(|(a, b)| sg * (a - b)).collect();

        let mut martingale = vec![0.0; d];
        for (row, w) in dataset.rows().iter().zip(&self.w) {
            let eps = row.y - dot(&row.x, theta_star);
            for (m, wi) in martingale.iter_mut().zip(w) {
                *m += sg * wi * eps;
            }
        }
        let err_od: Vec<f64> = self.theta_od.iter().zip(theta_star).map(|(a, b)| a - b).collect();
        let total = self.s_half.mul_vec(&err_od).into_iter().map(|v| sg * v).collect();
        Ok(Decomposition { bias, martingale, total })
    }
}

pub fn online_debias(dataset: &AdaptiveDataset, tuning: &TuningSchedule) -> Result<OdFit> {
    let fit = ols(dataset)?;
    online_debias_from(dataset, tuning, fit)
}

/// [`online_debias`] reusing an existing least-squares fit of `dataset`.
pub fn online_debias_from(dataset: &AdaptiveDataset, tuning: &TuningSchedule, fit: OlsFit) -> Result<OdFit> {
    let (weights, w) = run_weights(dataset, tuning, &fit.residuals)?;
    let s_half = fit.cov.s.sqrt()?;
    let correction = fit.cov.s.inv_sqrt().map_err(|_| Error::SingularDesign)?.mul_vec(weights.sum_w_r());
    let theta_od = fit.theta_ls.iter().zip(&correction).map(|(a, b)| a + b).collect();
    Ok(OdFit { theta_od, gamma_n: tuning.gamma_n, s_half, ols: fit, weights, w })
}

#[derive(Clone, Debug)]
pub struct DiagOdFit {
    /// Orthonormal basis with first row `v`.
    pub basis: Matrix,
    /// Estimate of `V theta*`; its first entry estimates `v^T theta*`.
    pub theta_diag_od: Vec<f64>,
    /// `V theta_ls`.
    pub theta_ls_rot: Vec<f64>,
    pub beta_n: f64,
    /// `blockdiag(omega11^{-1/2}, Omega22^{-1/2})`.
    pub d_half: SymmetricMatrix,
    pub omega11: f64,
    pub omega21: Vec<f64>,
    pub omega22: SymmetricMatrix,
    pub gamma_n: f64,
    pub sigma2_hat: f64,
    pub weights: WeightState,
}

impl DiagOdFit {
    /// Point estimate of `v^T theta*`.
    pub fn estimate(&self) -> f64 {
        self.theta_diag_od[0]
    }

    /// `v^T S_n^{-1} v`, which equals `omega11`.
    pub fn v_s_inv_v(&self) -> f64 {
        self.omega11
    }
}

/// `(beta_n, Omega22^{-1/2} Omega21 omega11^{-1/2})` for `Omega = (V S V^T)^{-1}`.
///
/// `beta_n = ||D^{1/2} S_v^{-1/2}||_op`. With `c` the returned vector,
/// `D^{1/2} Omega D^{1/2} = [[1, c^T], [c, I]]`, whose top eigenvalue is
/// `1 + |c|`, so `beta_n^2 = 1 + |c|`.
pub fn beta_from_omega(omega11: f64, omega21: &[f64], omega22: &SymmetricMatrix) -> Result<(f64, Vec<f64>)> {
    if omega21.is_empty() {
        return Ok((1.0, Vec::new()));
    }
    let c: Vec<f64> = omega22.inv_sqrt()?.mul_vec(omega21).into_iter().map(|v| v / omega11.sqrt()).collect();
    Ok(((1.0 + norm(&c)).sqrt(), c))
}

pub fn diag_online_debias(dataset: &AdaptiveDataset, v: &[f64], tuning: &TuningSchedule) -> Result<DiagOdFit> {
    let d = dataset.dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    if (norm(v) - 1.0).abs() > 1e-8 {
        return Err(Error::NonUnitDirection);
    }
    let basis = householder_basis(v);
    let rotated = dataset.map_covariates(|x| basis.mul_vec(x));
    let fit = ols(&rotated)?;
    let omega = fit.cov.s.inverse().map_err(|_| Error::SingularDesign)?;
    let omega11 = omega[(0, 0)];
    let rest: Vec<usize> = (1..d).collect();
    let omega21: Vec<f64> = rest.iter().map(|&k| omega[(k, 0)]).collect();
    let omega22 = omega.submatrix(&rest);
    let (beta_n, _) = beta_from_omega(omega11, &omega21, &omega22)?;

    let mut d_half = Matrix::zeros(d);
    let mut d_inv_half = Matrix::zeros(d);
    d_half[(0, 0)] = omega11.powf(-0.5);
    d_inv_half[(0, 0)] = omega11.sqrt();
    if d > 1 {
        let o22_inv_half = omega22.inv_sqrt()?;
        let o22_half = omega22.sqrt()?;
        for i in 1..d {
            for j in 1..d {
                d_half[(i, j)] = o22_inv_half[(i - 1, j - 1)];
                d_inv_half[(i, j)] = o22_half[(i - 1, j - 1)];
            }
        }
    }
    let d_half = SymmetricMatrix::from_upper(d_half);
    let d_inv_half = SymmetricMatrix::from_upper(d_inv_half);

    let rot_tuning = tuning.rotated(&basis);
    let (weights, _) = run_weights(&rotated, &rot_tuning, &fit.residuals)?;
    let correction = d_inv_half.mul_vec(weights.sum_w_r());
    let theta_diag_od = fit.theta_ls.iter().zip(&correction).map(|(a, b)| a + beta_n * b).collect();
    Ok(DiagOdFit {
        basis,
        theta_diag_od,
        theta_ls_rot: fit.theta_ls,
        beta_n,
        d_half,
        omega11,
        omega21,
        omega22,
        gamma_n: tuning.gamma_n,
        sigma2_hat: fit.sigma2_hat,
        weights,
    })
}

#[derive(Clone, Debug)]
pub struct PostDebiasFit {
    pub theta_pd: Vec<f64>,
    pub gammahat_n: f64,
    pub target_coord: usize,
    /// `e_j^T sqrt(gamma_n) sum w_i x_i^T S^{-1/2} e_j` before flooring.
    pub raw_sqrt_gamma: f64,
}

/// Post-debiasing for multi-armed bandits:
/// `sqrt(gammahat) = max{e_j^T sqrt(gamma) W X S^{-1/2} e_j, 1/(ln n ln ln n)}` and
/// `theta = theta_ls + sqrt(gamma/gammahat) S^{-1/2} sum w_i r_i`.
pub fn post_debias_correct(dataset: &AdaptiveDataset, tuning: &TuningSchedule, j: usize) -> Result<PostDebiasFit> {
    if j >= dataset.dim() {
        return Err(Error::InvalidArgument(format!("coordinate {j} out of range for d = {}", dataset.dim())));
    }
    if dataset.rows().iter().any(|r| arm_of(&r.x).is_none()) {
        return Err(Error::NotBandit);
    }
    let fit = ols(dataset)?;
    let (weights, _) = run_weights(dataset, tuning, &fit.residuals)?;
    let counts = fit.cov.s.diag();
    let raw_sqrt_gamma = tuning.gamma_n.sqrt() * weights.sum_wx()[(j, j)] / counts[j].sqrt();
    let floor = gamma_default(dataset.len())?;
    let sqrt_gh = raw_sqrt_gamma.max(floor);
    let k = tuning.gamma_n.sqrt() / sqrt_gh;
    let theta_pd = fit
        .theta_ls
        .iter()
        .zip(weights.sum_w_r())
        .zip(&counts)
        .map(|((t, s), c)| t + k * s / c.sqrt())
        .collect();
    Ok(PostDebiasFit { theta_pd, gammahat_n: sqrt_gh * sqrt_gh, target_coord: j, raw_sqrt_gamma })
}
