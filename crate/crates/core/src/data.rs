//! Adaptively collected datasets.
//!
//! Row order is collection order: the covariate of row `i` may depend on
//! every row before it. Nothing here reorders rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveDataset {
    dim: usize,
    rows: Vec<Observation>,
    /// Free-form provenance (policy, seed, true parameter, ...).
    pub meta: BTreeMap<String, String>,
}

impl AdaptiveDataset {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim, rows: Vec::new(), meta: BTreeMap::new() }
    }

    pub fn from_rows(dim: usize, rows: Vec<Observation>) -> Result<Self> {
        let mut ds = Self::new(dim);
        for row in rows {
            ds.push(row)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, row: Observation) -> Result<()> {
        if row.x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.x.len() });
        }
        if !row.y.is_finite() || row.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("row {}", self.rows.len() + 1)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn covariates(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(|r| r.x.as_slice())
    }

    /// Rows `0..len`, keeping the metadata.
    pub fn prefix(&self, len: usize) -> AdaptiveDataset {
        Self { dim: self.dim, rows: self.rows[..len.min(self.len())].to_vec(), meta: self.meta.clone() }
    }

    /// Same responses, covariates mapped through `f`.
    pub fn map_covariates(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> AdaptiveDataset {
        let rows = self.rows.iter().map(|r| Observation::new(f(&r.x), r.y)).collect();
        Self { dim: self.dim, rows, meta: self.meta.clone() }
    }

    /// True when every covariate is a standard basis vector.
    pub fn is_bandit(&self) -> bool {
        self.rows.iter().all(|r| arm_of(&r.x).is_some())
    }

    /// Reads the `x1,...,xd,y` CSV format.
    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
        let header = header.map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let dim = cols.len().saturating_sub(1);
        let expected: Vec<String> =
            (1..=dim).map(|k| format!("x{k}")).chain(std::iter::once("y".into())).collect();
        if dim == 0 || cols != expected {
            return Err(Error::Csv { line: 1, msg: format!("expected header {}", expected.join(",")) });
        }
        let mut ds = Self::new(dim);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Csv { line: lineno, msg: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| {
                    let f = f.trim();
                    let v: f64 = f
                        .parse()
                        .map_err(|_| Error::Csv { line: lineno, msg: format!("bad number {f:?}") })?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Csv { line: lineno, msg: format!("non-finite value {f:?}") })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != dim + 1 {
                return Err(Error::Csv {
                    line: lineno,
                    msg: format!("expected {} fields, got {}", dim + 1, vals.len()),
                });
            }
            let y = vals[dim];
            ds.push(Observation::new(vals[..dim].to_vec(), y))?;
        }
        Ok(ds)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the CSV format with shortest round-trip decimal text.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        let mut line = String::new();
        for r in &self.rows {
            line.clear();
            for v in &r.x {
                write!(line, "{v:?},").unwrap();
            }
            write!(line, "{:?}", r.y).unwrap();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Index of the arm when `x` is a standard basis vector.
pub fn arm_of(x: &[f64]) -> Option<usize> {
    let mut arm = None;
    for (k, &v) in x.iter().enumerate() {
        if v == 1.0 && arm.is_none() {
            arm = Some(k);
        } else if v != 0.0 {
            return None;
        }
    }
    arm
}

/// Running `S = sum x x^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovariance {
    pub s: SymmetricMatrix,
    pub n: usize,
}

impl SampleCovariance {
    pub fn new(dim: usize) -> Self {
        Self { s: SymmetricMatrix::zeros(dim), n: 0 }
    }

    pub fn absorb(&mut self, x: &[f64]) {
        self.s.rank_one_update(1.0, x);
        self.n += 1;
    }
}

pub fn sample_covariance(dataset: &AdaptiveDataset) -> Result<SampleCovariance> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cov = SampleCovariance::new(dataset.dim());
    for x in dataset.covariates() {
        cov.absorb(x);
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(dim: usize, rows: &[(&[f64], f64)]) -> AdaptiveDataset {
        AdaptiveDataset::from_rows(dim, rows.iter().map(|(x, y)| Observation::new(x.to_vec(), *y)).collect())
            .unwrap()
    }

    #[test]
    fn arm_pull_counts() {
        let d = ds(2, &[(&[1.0, 0.0], 0.1), (&[1.0, 0.0], 0.2), (&[0.0, 1.0], 0.3)]);
        let cov = sample_covariance(&d).unwrap();
        assert_eq!(cov.s, SymmetricMatrix::from_diag(&[2.0, 1.0]));
        assert_eq!(cov.n, 3);
    }

    #[test]
    fn single_row_outer_product() {
        let cov = sample_covariance(&ds(2, &[(&[1.0, 2.0], 0.0)])).unwrap();
        assert_eq!(cov.s, SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap());
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(sample_covariance(&AdaptiveDataset::new(2)), Err(Error::EmptyDataset)));
    }

    #[test]
    fn sphere_second_moment() {
        // E[x x^T] = I/2 on the unit circle.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut d = AdaptiveDataset::new(2);
        for _ in 0..1000 {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            d.push(Observation::new(vec![t.cos(), t.sin()], 0.0)).unwrap();
        }
        let s = sample_covariance(&d).unwrap().s.scale(1.0 / 1000.0);
        assert!((s[(0, 0)] - 0.5).abs() < 0.1);
        assert!((s[(1, 1)] - 0.5).abs() < 0.1);
        assert!(s[(0, 1)].abs() < 0.1);
    }

    #[test]
    fn permutation_does_not_change_covariance() {
        let rows = [(&[1.0, 2.0][..], 0.0), (&[-0.5, 3.0][..], 1.0), (&[0.25, 0.0][..], 2.0)];
        let a = sample_covariance(&ds(2, &rows)).unwrap();
        let rev: Vec<_> = rows.iter().rev().copied().collect();
        let b = sample_covariance(&ds(2, &rev)).unwrap();
        assert!(a.s.sub(&b.s).as_matrix().max_abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let d = ds(2, &[(&[1.0, 0.1], 0.3), (&[-2.5e-7, 1e10], -4.0)]);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y\n"));
        let back = AdaptiveDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows(), d.rows());
    }

    #[test]
    fn csv_rejects_bad_input() {
        let nan = "x1,y\n1.0,NaN\n";
        assert!(matches!(AdaptiveDataset::read_csv(nan.as_bytes()), Err(Error::Csv { line: 2, .. })));
        let inf = "x1,y\ninf,1\n";
        assert!(AdaptiveDataset::read_csv(inf.as_bytes()).is_err());
        let header = "a,b\n1,2\n";
        assert!(matches!(AdaptiveDataset::read_csv(header.as_bytes()), Err(Error::Csv { line: 1, .. })));
        let short = "x1,x2,y\n1,2\n";
        assert!(matches!(AdaptiveDataset::read_csv(short.as_bytes()), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn dimension_checked_on_push() {
        let mut d = AdaptiveDataset::new(2);
        assert!(matches!(
            d.push(Observation::new(vec![1.0], 0.0)),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
