//! Small dense linear algebra.
//!
//! Dimensions here are the regression dimension `d`, which stays small
//! (tens at most), so everything is dense, row-major and `O(d^3)`.
//! Symmetric eigendecompositions use cyclic Jacobi rotations, which are
//! accurate to working precision on every eigenvalue and need no pivoting.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius threshold (relative to `||A||_F`) that ends Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues in `[-PSD_TOL * lambda_max, 0]` are treated as round-off zeros.
const PSD_TOL: f64 = 1e-8;
/// `lambda_min <= SINGULAR_TOL * lambda_max` counts as singular.
const SINGULAR_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Square `d x d` matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "matrix rows must be square");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// `a b^T`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| a[i] * b[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len());
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.dim, other.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += s * a b^T`.
    pub fn add_outer(&mut self, s: f64, a: &[f64], b: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let ai = s * a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..d {
                self.data[i * d + j] += ai * b[j];
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Spectral norm, `sqrt(lambda_max(A^T A))`.
    pub fn op_norm(&self) -> f64 {
        let gram = SymmetricMatrix::from_full_unchecked(self.transpose().matmul(self));
        gram.eigen().max_value().max(0.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.dim).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Symmetric matrix. Only the upper triangle is ever written; the lower
/// triangle mirrors it, so `A[(j, k)] == A[(k, j)]` holds exactly.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

/// Eigendecomposition `A = Q diag(values) Q^T`; column `k` of `vectors` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigen {
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q diag(f(values)) Q^T`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let q = &self.vectors;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let s: f64 = (0..d).map(|k| q[(i, k)] * mapped[k] * q[(j, k)]).sum();
                out[(i, j)] = s;
            }
        }
        SymmetricMatrix::from_upper(out)
    }
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(Matrix::from_diag(diag))
    }

    /// Takes the upper triangle of `m` and mirrors it.
    pub fn from_upper(mut m: Matrix) -> Self {
        for i in 0..m.dim {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        Self(m)
    }

    /// Accepts a full matrix that is symmetric up to round-off; the upper triangle wins.
    pub fn from_full(m: Matrix) -> Result<Self> {
        let scale = m.max_abs().max(1.0);
        for i in 0..m.dim {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_upper(m))
    }

    pub(crate) fn from_full_unchecked(m: Matrix) -> Self {
        Self::from_upper(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_full(Matrix::from_rows(rows))
    }

    /// `x x^T`.
    pub fn outer(x: &[f64]) -> Self {
        let mut s = Self::zeros(x.len());
        s.rank_one_update(1.0, x);
        s
    }

    /// `self += s * x x^T`.
    pub fn rank_one_update(&mut self, s: f64, x: &[f64]) {
        let d = self.dim();
        for i in 0..d {
            let xi = s * x[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..d {
                self.0[(i, j)] += xi * x[j];
            }
        }
        for i in 0..d {
            for j in 0..i {
                self.0[(i, j)] = self.0[(j, i)];
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (i + 1..d).all(|j| self.0[(i, j)] == 0.0))
    }

    pub fn add(&self, other: &SymmetricMatrix) -> SymmetricMatrix {
        Self::from_upper(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> SymmetricMatrix {
        Self::from_upper(self.0.sub(&other.0))
    }

    pub fn scale(&self, s: f64) -> SymmetricMatrix {
        Self(self.0.scale(s))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.0.mul_vec(v)
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `B A B^T` for a square `B`.
    pub fn congruence(&self, b: &Matrix) -> SymmetricMatrix {
        Self::from_upper(b.matmul(&self.0).matmul(&b.transpose()))
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> SymmetricMatrix {
        Self::from_upper(Matrix::from_fn(idx.len(), |i, j| self.0[(idx[i], idx[j])]))
    }

    /// Cyclic Jacobi eigendecomposition.
    pub fn eigen(&self) -> Eigen {
        let d = self.dim();
        let mut a = self.0.clone();
        let mut q = Matrix::identity(d);
        let threshold = JACOBI_TOL * a.frobenius();
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= threshold {
                break;
            }
            for p in 0..d {
                for r in p + 1..d {
                    let apr = a[(p, r)];
                    if apr == 0.0 {
                        continue;
                    }
                    let app = a[(p, p)];
                    let arr = a[(r, r)];
                    let theta = (arr - app) / (2.0 * apr);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[(k, p)];
                        let akr = a[(k, r)];
                        a[(k, p)] = c * akp - s * akr;
                        a[(k, r)] = s * akp + c * akr;
                    }
                    for k in 0..d {
                        let apk = a[(p, k)];
                        let ark = a[(r, k)];
                        a[(p, k)] = c * apk - s * ark;
                        a[(r, k)] = s * apk + c * ark;
                    }
                    for k in 0..d {
                        let qkp = q[(k, p)];
                        let qkr = q[(k, r)];
                        q[(k, p)] = c * qkp - s * qkr;
                        q[(k, r)] = s * qkp + c * qkr;
                    }
                }
            }
        }
        Eigen { values: (0..d).map(|i| a[(i, i)]).collect(), vectors: q }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min_value()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().max_value()
    }

    pub fn op_norm(&self) -> f64 {
        let e = self.eigen();
        e.max_value().abs().max(e.min_value().abs())
    }

    /// Symmetric PSD square root.
    pub fn sqrt(&self) -> Result<SymmetricMatrix> {
        if self.is_diagonal() {
            let diag = self.diag();
            let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut out = Vec::with_capacity(diag.len());
            for v in diag {
                if v < -PSD_TOL * scale {
                    return Err(Error::NotPsd(v));
                }
                out.push(v.max(0.0).sqrt());
            }
            return Ok(Self::from_diag(&out));
        }
        let e = self.eigen();
        let scale = e.max_value().abs().max(e.min_value().abs());
        if e.min_value() < -PSD_TOL * scale {
            return Err(Error::NotPsd(e.min_value()));
        }
        Ok(e.reconstruct(|v| v.max(0.0).sqrt()))
    }

    /// Symmetric square root of the inverse. Diagonal input takes an exact fast path.
    pub fn inv_sqrt(&self) -> Result<SymmetricMatrix> {
        if self.is_diagonal() {
            let diag = self.diag();
            let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if diag.iter().any(|&v| !(v > SINGULAR_TOL * max) || !(max > 0.0)) {
                return Err(Error::SingularCovariance);
            }
            return Ok(Self::from_diag(&diag.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>()));
        }
        let e = self.eigen();
        let (lo, hi) = (e.min_value(), e.max_value());
        if !(hi > 0.0) || !(lo > SINGULAR_TOL * hi) {
            return Err(Error::SingularCovariance);
        }
        Ok(e.reconstruct(|v| 1.0 / v.sqrt()))
    }

    /// Inverse of an SPD matrix.
    pub fn inverse(&self) -> Result<SymmetricMatrix> {
        let chol = Cholesky::new(self)?;
        let d = self.dim();
        let mut out = Matrix::zeros(d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = chol.solve(&e);
            for i in 0..d {
                out[(i, j)] = col[i];
            }
        }
        Ok(Self::from_upper(out))
    }

    /// Solves `A u = b` for SPD `A`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len() });
        }
        Ok(Cholesky::new(self)?.solve(b))
    }

    /// `log det A` for SPD `A`.
    pub fn log_det(&self) -> Result<f64> {
        let chol = Cholesky::new(self)?;
        Ok((0..self.dim()).map(|i| 2.0 * chol.l[(i, i)].ln()).sum())
    }
}

impl Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    fn new(a: &SymmetricMatrix) -> Result<Self> {
        let d = a.dim();
        let scale = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) || !a.as_matrix().is_finite() {
            return Err(Error::SingularCovariance);
        }
        let mut l = Matrix::zeros(d);
        for j in 0..d {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > SINGULAR_TOL * scale) {
                return Err(Error::SingularCovariance);
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..d {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = b.len();
        let l = &self.l;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
            y[i] = (b[i] - s) / l[(i, i)];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|k| l[(k, i)] * x[k]).sum();
            x[i] = (y[i] - s) / l[(i, i)];
        }
        x
    }
}

/// Symmetric PSD square root; see [`SymmetricMatrix::sqrt`].
pub fn sym_sqrt(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    s.sqrt()
}

/// Symmetric square root of `S^{-1}`; see [`SymmetricMatrix::inv_sqrt`].
pub fn sym_inv_sqrt(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    s.inv_sqrt()
}

pub fn solve_spd(s: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    s.solve(b)
}

/// Orthonormal matrix whose first row is `v` (a Householder reflection
/// taking `e_1` to `v`). `v` must be unit norm. Signed coordinate vectors
/// give exact signed permutation matrices.
pub fn householder_basis(v: &[f64]) -> Matrix {
    let d = v.len();
    let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let un2 = dot(&u, &u);
    if un2 < 1e-30 {
        return Matrix::identity(d);
    }
    let mut h = Matrix::identity(d);
    h.add_outer(-2.0 / un2, &u, &u);
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        let diff = a.sub(b).max_abs();
        assert!(diff <= tol, "max diff {diff:e} > {tol:e}\n{a:?}\n{b:?}");
    }

    fn random_psd(dim: usize, rank: usize, entries: &[f64]) -> SymmetricMatrix {
        let mut s = SymmetricMatrix::zeros(dim);
        for r in 0..rank {
            s.rank_one_update(1.0, &entries[r * dim..(r + 1) * dim]);
        }
        s
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = sym_sqrt(&SymmetricMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(r, SymmetricMatrix::from_diag(&[2.0, 3.0]));
        let i = SymmetricMatrix::identity(3);
        assert_eq!(sym_sqrt(&i).unwrap(), i);
    }

    #[test]
    fn sqrt_of_dense_two_by_two() {
        let s = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = sym_sqrt(&s).unwrap();
        assert_close(&r.as_matrix().matmul(r.as_matrix()), s.as_matrix(), 1e-10);
        // Eigenvalues 1 and 3 with eigenvectors (1,-1), (1,1).
        let a = (1.0 + 3f64.sqrt()) / 2.0;
        let b = (3f64.sqrt() - 1.0) / 2.0;
        assert_close(r.as_matrix(), &Matrix::from_rows(&[vec![a, b], vec![b, a]]), 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let s = SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(sym_sqrt(&s), Err(Error::NotPsd(_))));
        assert!(matches!(
            sym_sqrt(&SymmetricMatrix::from_diag(&[1.0, -0.5])),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn sqrt_clamps_round_off_negatives() {
        // Rank-one matrix perturbed slightly negative along the null direction.
        let mut s = SymmetricMatrix::outer(&[1.0, 1.0]);
        s.rank_one_update(-1e-12, &[1.0, -1.0]);
        let r = sym_sqrt(&s).unwrap();
        assert_close(&r.as_matrix().matmul(r.as_matrix()), s.as_matrix(), 1e-10);
    }

    #[test]
    fn inv_sqrt_cases() {
        let r = sym_inv_sqrt(&SymmetricMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(r, SymmetricMatrix::from_diag(&[0.5, 1.0 / 3.0]));
        let i = SymmetricMatrix::identity(2);
        assert_eq!(sym_inv_sqrt(&i).unwrap(), i);
        assert!(matches!(
            sym_inv_sqrt(&SymmetricMatrix::outer(&[1.0, 2.0])),
            Err(Error::SingularCovariance)
        ));
        assert!(matches!(
            sym_inv_sqrt(&SymmetricMatrix::from_diag(&[1.0, 0.0])),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn solve_cases() {
        let u = solve_spd(&SymmetricMatrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(u, vec![3.0, 4.0]);
        let u = solve_spd(&SymmetricMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-15), "{u:?}");
        assert!(matches!(
            solve_spd(&SymmetricMatrix::outer(&[1.0, 1.0]), &[1.0, 1.0]),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn householder_first_row_is_direction() {
        let v = [0.6, 0.0, 0.8];
        let h = householder_basis(&v);
        assert_close(&h.matmul(&h.transpose()), &Matrix::identity(3), 1e-14);
        for (a, b) in h.row(0).iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(householder_basis(&[1.0, 0.0]), Matrix::identity(2));
        let swap = householder_basis(&[0.0, 1.0]);
        assert_close(&swap, &Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 1e-15);
    }

    #[test]
    fn op_norm_of_non_symmetric() {
        // [[0, 2], [0, 0]] has spectral norm 2.
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]);
        assert!((m.op_norm() - 2.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn sqrt_squares_back(dim in 1usize..=8, rank_frac in 0.0f64..=1.0,
                             entries in proptest::collection::vec(-3.0f64..3.0, 64)) {
            let rank = ((dim as f64) * rank_frac).ceil() as usize;
            let s = random_psd(dim, rank.max(1), &entries);
            let r = sym_sqrt(&s).unwrap();
            let rr = r.as_matrix().matmul(r.as_matrix());
            let tol = 1e-10 * (1.0 + s.as_matrix().max_abs());
            prop_assert!(rr.sub(s.as_matrix()).max_abs() <= tol);
        }

        #[test]
        fn inv_sqrt_whitens(dim in 1usize..=8, entries in proptest::collection::vec(-2.0f64..2.0, 64)) {
            // A^T A + I is comfortably SPD.
            let mut s = random_psd(dim, dim, &entries);
            s = s.add(&SymmetricMatrix::identity(dim));
            let r = sym_inv_sqrt(&s).unwrap();
            let whitened = r.as_matrix().matmul(s.as_matrix()).matmul(r.as_matrix());
            prop_assert!(whitened.sub(&Matrix::identity(dim)).max_abs() <= 1e-8);
            let root = sym_sqrt(&s).unwrap();
            let prod = r.as_matrix().matmul(root.as_matrix());
            prop_assert!(prod.sub(&Matrix::identity(dim)).max_abs() <= 1e-8);
        }

        #[test]
        fn solve_has_small_residual(dim in 1usize..=8, entries in proptest::collection::vec(-2.0f64..2.0, 72)) {
            let mut s = random_psd(dim, dim, &entries);
            s = s.add(&SymmetricMatrix::identity(dim));
            let b = &entries[64..64 + dim];
            let u = solve_spd(&s, b).unwrap();
            let res: Vec<f64> = s.mul_vec(&u).iter().zip(b).map(|(a, c)| a - c).collect();
            prop_assert!(norm(&res) <= 1e-10 * norm(b).max(f64::MIN_POSITIVE));
        }
    }
}
