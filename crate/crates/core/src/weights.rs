//! Online-debiasing weight recursion.
//!
//! With `z_i = Gamma_i^{-1/2} x_i` and `Delta_{i-1} = I - W_{i-1} Z_{i-1}`,
//! each step takes
//!
//! ```text
//! w_i     = Delta_{i-1} z_i / (gamma_n / 2 + |z_i|^2)
//! Delta_i = Delta_{i-1} - w_i z_i^T
//! ```
//!
//! and `w_i` only depends on covariates and scaling matrices up to row `i`.
//! Alongside the recursion the state keeps every accumulator needed for the
//! exact identity
//!
//! ```text
//! I - gamma_n sum w w^T = sum |z|^2 w w^T + Delta Delta^T
//! ```
//!
//! and for the assumption diagnostics reported by [`crate::inference`].

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricMatrix};

#[derive(Clone, Debug)]
pub struct WeightState {
    gamma_n: f64,
    /// `I - W Z`.
    delta: Matrix,
    /// `sum w_i r_i` for the residual stream fed through [`WeightState::accumulate`].
    sum_w_r: Vec<f64>,
    /// `gamma_n sum w_i w_i^T`.
    sum_gww: SymmetricMatrix,
    /// `sum |z_i|^2 w_i w_i^T`.
    sum_zsq_ww: SymmetricMatrix,
    /// `sum w_i z_i^T`, i.e. `sum w_i x_i^T Gamma_i^{-1/2}`.
    sum_wz: Matrix,
    /// `sum w_i x_i^T` (`W_n X_n`).
    sum_wx: Matrix,
    /// `sum z_i z_i^T`.
    sum_zz: SymmetricMatrix,
    max_gw_norm: f64,
    max_z_ratio: f64,
    max_delta_op: f64,
    steps: usize,
    history: Option<Vec<Vec<f64>>>,
}

impl WeightState {
    pub fn new(dim: usize, gamma_n: f64) -> Result<Self> {
        if !(gamma_n > 0.0) || !gamma_n.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma_n must be positive, got {gamma_n}")));
        }
        Ok(Self {
            gamma_n,
            delta: Matrix::identity(dim),
            sum_w_r: vec![0.0; dim],
            sum_gww: SymmetricMatrix::zeros(dim),
            sum_zsq_ww: SymmetricMatrix::zeros(dim),
            sum_wz: Matrix::zeros(dim),
            sum_wx: Matrix::zeros(dim),
            sum_zz: SymmetricMatrix::zeros(dim),
            max_gw_norm: 0.0,
            max_z_ratio: 0.0,
            max_delta_op: 1.0,
            steps: 0,
            history: None,
        })
    }

    /// Keeps every `w_i` and tracks `max_k ||Delta_k||_op` (an eigen solve per step).
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn dim(&self) -> usize {
        self.delta.dim()
    }

    /// Advances the recursion by one row.
    ///
    /// `x = 0` yields `w = 0` whatever `scaling` is; this covers the zero
    /// scaling produced on the first step of an autoregression started at 0.
    pub fn step(&mut self, x: &[f64], scaling: &SymmetricMatrix) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d || scaling.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len().max(scaling.dim()) });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariate".into()));
        }
        let z = if x.iter().all(|&v| v == 0.0) {
            vec![0.0; d]
        } else {
            whiten(x, scaling)?
        };
        let zsq: f64 = z.iter().map(|v| v * v).sum();
        let w: Vec<f64> = if zsq == 0.0 {
            vec![0.0; d]
        } else {
            let denom = self.gamma_n / 2.0 + zsq;
            self.delta.mul_vec(&z).into_iter().map(|v| v / denom).collect()
        };

        self.delta.add_outer(-1.0, &w, &z);
        self.sum_gww.rank_one_update(self.gamma_n, &w);
        self.sum_zsq_ww.rank_one_update(zsq, &w);
        self.sum_wz.add_outer(1.0, &w, &z);
        self.sum_wx.add_outer(1.0, &w, x);
        self.sum_zz.rank_one_update(1.0, &z);
        let wn: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.max_gw_norm = self.max_gw_norm.max(self.gamma_n.sqrt() * wn);
        self.max_z_ratio = self.max_z_ratio.max(zsq / self.gamma_n);
        self.steps += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(w.clone());
            self.max_delta_op = self.max_delta_op.max(self.delta.op_norm());
        }
        Ok(w)
    }

    /// Adds `w r` to the running `sum w_i r_i`.
    pub fn accumulate(&mut self, w: &[f64], r: f64) {
        for (s, wi) in self.sum_w_r.iter_mut().zip(w) {
            *s += wi * r;
        }
    }

    /// `|| (I - gamma sum w w^T) - (sum |z|^2 w w^T + Delta Delta^T) ||_max`.
    pub fn recursion_identity_residual(&self) -> f64 {
        let d = self.dim();
        let lhs = Matrix::identity(d).sub(self.sum_gww.as_matrix());
        let ddt = self.delta.matmul(&self.delta.transpose());
        let rhs = self.sum_zsq_ww.as_matrix().add(&ddt);
        lhs.sub(&rhs).max_abs()
    }

    /// `exp(-lambda_min(sum z z^T) / gamma_n)` evaluated on this state.
    pub fn commutative_bound(&self) -> f64 {
        commutative_bound(self.gamma_n, self.sum_zz.min_eigenvalue().max(0.0))
    }

    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    pub fn sum_w_r(&self) -> &[f64] {
        &self.sum_w_r
    }

    pub fn sum_gww(&self) -> &SymmetricMatrix {
        &self.sum_gww
    }

    pub fn sum_zsq_ww(&self) -> &SymmetricMatrix {
        &self.sum_zsq_ww
    }

    pub fn sum_wz(&self) -> &Matrix {
        &self.sum_wz
    }

    pub fn sum_wx(&self) -> &Matrix {
        &self.sum_wx
    }

    pub fn sum_zz(&self) -> &SymmetricMatrix {
        &self.sum_zz
    }

    /// `max_i sqrt(gamma_n) |w_i|`.
    pub fn max_gw_norm(&self) -> f64 {
        self.max_gw_norm
    }

    /// `max_i |z_i|^2 / gamma_n`.
    pub fn max_z_ratio(&self) -> f64 {
        self.max_z_ratio
    }

    /// `max_k ||Delta_k||_op` over prefixes; only tracked with history enabled.
    pub fn max_delta_op(&self) -> Option<f64> {
        self.history.as_ref().map(|_| self.max_delta_op)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }
}

/// `Gamma^{-1/2} x`; diagonal `Gamma` never goes through an eigensolve.
fn whiten(x: &[f64], scaling: &SymmetricMatrix) -> Result<Vec<f64>> {
    if scaling.is_diagonal() {
        return x
            .iter()
            .zip(scaling.diag())
            .map(|(&xi, g)| if g > 0.0 { Ok(xi / g.sqrt()) } else { Err(Error::InvalidScaling) })
            .collect();
    }
    match scaling.inv_sqrt() {
        Ok(r) => Ok(r.mul_vec(x)),
        Err(Error::SingularCovariance) | Err(Error::NotPsd(_)) => Err(Error::InvalidScaling),
        Err(e) => Err(e),
    }
}

/// One recursion step as a pure function: returns `w` and the new state.
pub fn step_weights(state: &WeightState, x: &[f64], scaling: &SymmetricMatrix) -> Result<(Vec<f64>, WeightState)> {
    let mut next = state.clone();
    let w = next.step(x, scaling)?;
    Ok((w, next))
}

/// `exp(-min_eig_sum_zz / gamma_n)`.
///
/// Upper-bounds `||I - sum w_i z_i^T||_op` when the `z_i z_i^T` commute and
/// every `|z_i|^2 <= 1.25 gamma_n` (each contraction factor
/// `1 / (1 + 2|z|^2/gamma)` is below `exp(-|z|^2/gamma)` exactly on that range).
pub fn commutative_bound(gamma_n: f64, min_eig_sum_zz: f64) -> f64 {
    (-min_eig_sum_zz / gamma_n).exp()
}

/// Largest `|z|^2 / gamma_n` for which [`commutative_bound`] is guaranteed.
pub const COMMUTATIVE_MAX_Z_RATIO: f64 = 1.25;
