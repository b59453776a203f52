//! Summary statistics used by experiments and acceptance checks.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distributions::normal_cdf;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricMatrix};
use crate::rng::stream;

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and `Phi`.
pub fn ks_statistic(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("KS statistic of an empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max))
}

/// Counts over `bins` equal-width bins on `[lo, hi]`; values outside are clamped
/// into the edge bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut h = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let k = ((v - lo) / width).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
        h[k] += 1;
    }
    h
}

/// Indices of strict local maxima (edge bins compare with their only neighbor;
/// the left edge of a plateau counts).
pub fn local_maxima(h: &[usize]) -> Vec<usize> {
    let n = h.len();
    (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || h[i] > h[i - 1];
            let mut j = i + 1;
            while j < n && h[j] == h[i] {
                j += 1;
            }
            let right_ok = j == n || h[i] > h[j];
            left_ok && right_ok && h[i] > 0
        })
        .collect()
}

/// The two highest local maxima of a histogram, in bin order, if there are two.
pub fn two_largest_modes(h: &[usize]) -> Option<(usize, usize)> {
    let mut peaks = local_maxima(h);
    peaks.sort_by(|a, b| h[*b].cmp(&h[*a]).then(a.cmp(b)));
    match peaks.as_slice() {
        [a, b, ..] => Some(((*a).min(*b), (*a).max(*b))),
        _ => None,
    }
}

/// Monte Carlo `E||theta_ls - theta*||_M^2` for a fixed design with
/// `N(0, sigma2)` noise, next to the exact value `sigma2 tr(S^{-1} M)`.
pub fn minimax_trace_check(
    rows: &[Vec<f64>],
    m: &SymmetricMatrix,
    sigma2: f64,
    replications: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = m.dim();
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut s = SymmetricMatrix::zeros(d);
    for x in rows {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        s.rank_one_update(1.0, x);
    }
    let s_inv = s.inverse().map_err(|_| Error::SingularDesign)?;
    let bound = sigma2 * s_inv.as_matrix().matmul(m.as_matrix()).trace();
    let sigma = sigma2.sqrt();
    let risks: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r);
            let mut xte = vec![0.0; d];
            for x in rows {
                let e: f64 = StandardNormal.sample(&mut rng);
                for (a, xi) in xte.iter_mut().zip(x) {
                    *a += xi * sigma * e;
                }
            }
            m.quad_form(&s_inv.mul_vec(&xte))
        })
        .collect();
    let risk = risks.iter().sum::<f64>() / replications as f64;
    Ok((risk, bound))
}

/// A random symmetric PSD matrix `A A^T` with standard normal `A`.
pub fn random_psd(d: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = stream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let a = Matrix::from_rows(&rows);
    SymmetricMatrix::from_upper(a.matmul(&a.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal_quantile;

    #[test]
    fn ks_basics() {
        assert!((ks_statistic(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        let m = 1000;
        let xs: Vec<f64> = (1..=m).map(|i| normal_quantile((i as f64 - 0.5) / m as f64).unwrap()).collect();
        assert!(ks_statistic(&xs).unwrap() <= 0.5 / m as f64 + 1e-6);
        assert!(ks_statistic(&[]).is_err());
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!(ks_statistic(&shifted).unwrap() > 0.3);
    }

    #[test]
    fn histogram_modes() {
        let h = histogram(&[0.05, 0.06, 0.07, 0.5, 0.91, 0.92, 1.0, -0.2], 20, 0.0, 1.0);
        assert_eq!(h.iter().sum::<usize>(), 8);
        assert_eq!(h[0], 1);
        assert_eq!(h[1], 3);
        assert_eq!(h[19], 1);
        assert_eq!(two_largest_modes(&h), Some((1, 18)));
        assert_eq!(local_maxima(&[0, 2, 2, 1, 0, 3]), vec![1, 5]);
        assert_eq!(two_largest_modes(&[0, 5, 0]), None);
    }

    #[test]
    fn trace_identity_small() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]];
        let (risk, bound) = minimax_trace_check(&rows, &SymmetricMatrix::zeros(2), 1.0, 10, 0).unwrap();
        assert_eq!((risk, bound), (0.0, 0.0));
        let s = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 5.0]]).unwrap();
        let (risk, bound) = minimax_trace_check(&rows, &s, 2.0, 20_000, 1).unwrap();
        assert!((bound - 4.0).abs() < 1e-12);
        assert!((risk / bound - 1.0).abs() < 0.05, "{risk} vs {bound}");
        assert!(minimax_trace_check(&[vec![1.0, 1.0]], &s, 1.0, 1, 0).is_err());
    }
}
