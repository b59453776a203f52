//! Aggregated experiment results and their CSV form.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::{AssumptionDiagnostics, CiMethod, Tail};

pub const COVERAGE_HEADER: &str =
    "scenario,method,alpha,tail,coverage,coverage_se,mean_width,width_se,replications,seed";
pub const ERRORS_HEADER: &str = "scenario,replication,coordinate,standardized_error";

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub scenario: String,
    pub method: CiMethod,
    pub alpha: f64,
    pub tail: Tail,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_width: f64,
    pub width_se: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Per-replication standardized error `sqrt(gamma/sigma2) S^{1/2} (theta - theta*)`
/// for one coordinate (1-based in files).
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub scenario: String,
    pub replication: usize,
    pub coordinate: usize,
    pub standardized_error: f64,
}

/// Per-replication quantities outside the CSV schema.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationSummary {
    pub diagnostics: AssumptionDiagnostics,
    /// Smallest arm count for bandit data, `None` otherwise.
    pub min_pulls: Option<f64>,
    pub gamma_n: f64,
    pub sigma2_hat: f64,
    /// `sqrt(1/sigma2) S^{1/2} (theta_ls - theta*)`.
    pub ols_standardized: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub errors: Vec<ErrorRow>,
    pub replications: Vec<ReplicationSummary>,
}

impl CoverageReport {
    pub fn row(&self, scenario: &str, method: CiMethod, alpha: f64, tail: Tail) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.method == method && r.tail == tail && (r.alpha - alpha).abs() < 1e-12)
    }

    /// Standardized online-debiasing errors for one zero-based coordinate.
    pub fn od_errors(&self, coordinate: usize) -> Vec<f64> {
        self.errors.iter().filter(|e| e.coordinate == coordinate + 1).map(|e| e.standardized_error).collect()
    }

    /// Standardized least-squares errors for one zero-based coordinate.
    pub fn ols_errors(&self, coordinate: usize) -> Vec<f64> {
        self.replications.iter().map(|r| r.ols_standardized[coordinate]).collect()
    }
}

/// `printf("%.12g")`.
pub fn fmt_g(x: f64) -> String {
    fmt_sig(x, 12)
}

pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_coverage(rows: &[CoverageRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{COVERAGE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.method,
            fmt_g(r.alpha),
            r.tail,
            fmt_g(r.coverage),
            fmt_g(r.coverage_se),
            fmt_g(r.mean_width),
            fmt_g(r.width_se),
            r.replications,
            r.seed
        )?;
    }
    Ok(())
}

pub fn write_errors(rows: &[ErrorRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{ERRORS_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.scenario, r.replication, r.coordinate, fmt_g(r.standardized_error))?;
    }
    Ok(())
}

/// Writes `coverage.csv` and `errors.csv` into `dir`, creating it if needed.
pub fn emit_csv(report: &CoverageReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cov = dir.join("coverage.csv");
    let mut buf = Vec::new();
    write_coverage(&report.rows, &mut buf).expect("writing to memory");
    std::fs::write(&cov, buf).map_err(|e| Error::io(&cov, e))?;
    let err = dir.join("errors.csv");
    let mut buf = Vec::new();
    write_errors(&report.errors, &mut buf).expect("writing to memory");
    std::fs::write(&err, buf).map_err(|e| Error::io(&err, e))
}

fn csv_lines(reader: impl BufRead, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or(Error::Csv { line: 1, msg: "missing header".into() })?;
    let first = first.map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?;
    if first.trim() != header {
        return Err(Error::Csv { line: 1, msg: format!("expected header {header}") });
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::Csv { line: lineno, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != width {
            return Err(Error::Csv { line: lineno, msg: format!("expected {width} fields, got {}", fields.len()) });
        }
        out.push((lineno, fields));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Csv { line, msg: format!("bad value {s:?}") })
}

pub fn read_coverage(reader: impl BufRead) -> Result<Vec<CoverageRow>> {
    csv_lines(reader, COVERAGE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let wrap = |e: Error| Error::Csv { line, msg: e.to_string() };
            Ok(CoverageRow {
                scenario: f[0].clone(),
                method: CiMethod::parse(&f[1]).map_err(wrap)?,
                alpha: field(line, &f[2])?,
                tail: Tail::parse(&f[3]).map_err(wrap)?,
                coverage: field(line, &f[4])?,
                coverage_se: field(line, &f[5])?,
                mean_width: field(line, &f[6])?,
                width_se: field(line, &f[7])?,
                replications: field(line, &f[8])?,
                seed: field(line, &f[9])?,
            })
        })
        .collect()
}

pub fn read_errors(reader: impl BufRead) -> Result<Vec<ErrorRow>> {
    csv_lines(reader, ERRORS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(ErrorRow {
                scenario: f[0].clone(),
                replication: field(line, &f[1])?,
                coordinate: field(line, &f[2])?,
                standardized_error: field(line, &f[3])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(0.95), "0.95");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(123456.789), "123456.789");
        assert_eq!(fmt_g(1e-5), "1e-05");
        assert_eq!(fmt_g(0.0001234), "0.0001234");
        assert_eq!(fmt_g(1.5e12), "1.5e+12");
        assert_eq!(fmt_g(999999999999.5), "1e+12");
        assert_eq!(fmt_g(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(fmt_g(f64::NAN), "nan");
        for x in [0.1, 1.0 / 7.0, 12345.678901234, -3.3e-9] {
            let back: f64 = fmt_g(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![CoverageRow {
            scenario: "bandit".into(),
            method: CiMethod::OdDirection,
            alpha: 0.05,
            tail: Tail::TwoSided,
            coverage: 0.951,
            coverage_se: (0.951f64 * 0.049 / 1000.0).sqrt(),
            mean_width: 0.7,
            width_se: 0.001,
            replications: 1000,
            seed: 7,
        }];
        let mut buf = Vec::new();
        write_coverage(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(COVERAGE_HEADER));
        let back = read_coverage(&buf[..]).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back[0].coverage_se - rows[0].coverage_se).abs() < 1e-13);
        assert_eq!(back[0].method, CiMethod::OdDirection);

        let errs = vec![ErrorRow { scenario: "x".into(), replication: 3, coordinate: 1, standardized_error: -0.25 }];
        let mut buf = Vec::new();
        write_errors(&errs, &mut buf).unwrap();
        assert_eq!(read_errors(&buf[..]).unwrap(), errs);
        assert!(matches!(read_errors("wrong\n".as_bytes()), Err(Error::Csv { line: 1, .. })));
    }
}
