//! Standard normal and chi-squared distribution functions.
//!
//! Both CDFs reduce to the regularized incomplete gamma function, evaluated
//! by its power series below `a + 1` and by a Lentz continued fraction above.
//! Quantiles are found by safeguarded Newton iteration inside a bracket.

use crate::error::{Error, Result};

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `(P(a, x), Q(a, x))`, the regularized lower and upper incomplete gamma functions.
pub fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Phi(x)`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let (_, q) = incomplete_gamma(0.5, 0.5 * x * x);
    if x < 0.0 {
        0.5 * q
    } else {
        1.0 - 0.5 * q
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Newton iteration for `cdf(x) = p` kept inside `[lo, hi]`, falling back to
/// bisection whenever a step leaves the bracket.
fn invert(p: f64, mut x: f64, mut lo: f64, mut hi: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = pdf(x);
        let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// `Phi^{-1}(p)` to absolute accuracy well below 1e-9.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    // Rational initial guess (absolute error below 5e-4).
    let q = p.min(1.0 - p);
    let t = (-2.0 * q.ln()).sqrt();
    let g = t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t);
    // Solve in the lower tail where Phi is computed without cancellation.
    let z = invert(q, -g, -40.0, 0.0, normal_cdf, normal_pdf);
    Ok(if p < 0.5 { z } else { -z })
}

pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    incomplete_gamma(dof as f64 / 2.0, x / 2.0).0
}

pub fn chi2_pdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return if dof == 2 { 0.5 } else { 0.0 };
    }
    let k = dof as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Inverse CDF of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_quantile(dof: usize, p: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("chi-squared degrees of freedom must be >= 1".into()));
    }
    check_probability(p)?;
    let k = dof as f64;
    let z = normal_quantile(p)?;
    let h = 2.0 / (9.0 * k);
    let guess = (k * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-3 * k);
    let mut hi = guess.max(1.0);
    while chi2_cdf(dof, hi) < p {
        hi *= 2.0;
    }
    let x0 = guess.min(hi);
    Ok(invert(p, x0, 0.0, hi, |x| chi2_cdf(dof, x), |x| chi2_pdf(dof, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    #[test]
    fn normal_quantile_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_quantile(0.95).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-9);
        assert!(normal_quantile(0.0).is_err() && normal_quantile(1.0).is_err() && normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_matches_reference_implementation() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((normal_quantile(p).unwrap() - n.inverse_cdf(p)).abs() < 1e-8, "p = {p}");
            let x = -6.0 + 12.0 * p;
            assert!((normal_cdf(x) - n.cdf(x)).abs() < 1e-10, "x = {x}");
        }
        assert!((normal_quantile(1e-12).unwrap() + 7.034_483_825_9).abs() < 1e-8);
    }

    #[test]
    fn normal_cdf_reference_points() {
        let cases = [
            (-8.0, 6.220_960_574_271_819e-16),
            (-5.0, 2.866_515_718_791_946e-7),
            (-3.66, 1.261_076_241_384_867e-4),
            (-1.0, 0.158_655_253_931_457_07),
            (0.3, 0.617_911_422_188_952_6),
            (2.5, 0.993_790_334_674_223_8),
        ];
        for (x, want) in cases {
            assert!((normal_cdf(x) - want).abs() <= 1e-13 * want, "x = {x}");
        }
    }

    #[test]
    fn quantile_round_trips_on_grid() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((normal_cdf(normal_quantile(p).unwrap()) - p).abs() < 1e-9);
            for dof in [1, 2, 3, 5, 10] {
                assert!((chi2_cdf(dof, chi2_quantile(dof, p).unwrap()) - p).abs() < 1e-8, "dof {dof} p {p}");
            }
        }
    }

    #[test]
    fn chi2_values() {
        assert!((chi2_quantile(2, 0.95).unwrap() - (-2.0 * 0.05f64.ln())).abs() < 1e-8 * 6.0);
        for p in [0.1, 0.5, 0.9, 0.95, 0.99] {
            let z = normal_quantile((1.0 + p) / 2.0).unwrap();
            assert!((chi2_quantile(1, p).unwrap() - z * z).abs() < 1e-7);
        }
        let q = chi2_quantile(5, 0.9).unwrap();
        assert!((q - 9.236_356_899_781_123).abs() < 1e-8 * q);
        let reference = ChiSquared::new(7.0).unwrap();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let q = chi2_quantile(7, p).unwrap();
            assert!((q - reference.inverse_cdf(p)).abs() < 1e-7 * q);
        }
        assert!(chi2_quantile(0, 0.5).is_err() && chi2_quantile(3, 1.0).is_err());
    }

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normal_round_trip(p in 1e-10f64..(1.0 - 1e-10)) {
            let x = normal_quantile(p).unwrap();
            prop_assert!((normal_cdf(x) - p).abs() < 1e-9);
        }

        #[test]
        fn normal_symmetry(x in -8.0f64..8.0) {
            prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
