use adaptive_od::harness::report::{read_coverage, read_errors, write_coverage, write_errors, COVERAGE_HEADER};
use adaptive_od::harness::{emit_csv, run_experiment_with_threads, ExperimentConfig};
use adaptive_od::inference::{CiMethod, Tail};

fn small(scenario_lines: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("{scenario_lines}\nn = 300\nreplications = 60\nseed = 5\n")).unwrap()
}

fn bytes(report: &adaptive_od::harness::CoverageReport) -> (Vec<u8>, Vec<u8>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_coverage(&report.rows, &mut a).unwrap();
    write_errors(&report.errors, &mut b).unwrap();
    (a, b)
}

#[test]
fn thread_count_does_not_change_output() {
    for lines in [
        "scenario = bandit\npolicy = ucb\ntheta_star = 0.3, 0.3",
        "scenario = ar1\ntheta_star = 0.9",
        "scenario = linear_bandit\ntheta_star = 0.3, 0.3\ntargets = 1, 2",
        "scenario = adversarial\ndim = 3\ntheta_star = 0, 0, 0",
    ] {
        let cfg = small(lines);
        let one = run_experiment_with_threads(&cfg, 1).unwrap();
        let four = run_experiment_with_threads(&cfg, 4).unwrap();
        assert_eq!(bytes(&one), bytes(&four), "{lines}");
    }
}

#[test]
fn emitted_csv_parses_back() {
    let cfg = small("scenario = bandit\npolicy = thompson\ntheta_star = 0.3, 0.3");
    let report = run_experiment_with_threads(&cfg, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_csv(&report, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), COVERAGE_HEADER);
    let rows = read_coverage(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), report.rows.len());
    for (a, b) in rows.iter().zip(&report.rows) {
        assert_eq!((a.method, a.tail, &a.scenario, a.seed), (b.method, b.tail, &b.scenario, b.seed));
        assert!((0.0..=1.0).contains(&a.coverage));
        assert!((a.coverage - b.coverage).abs() <= 1e-12);
        assert!((a.mean_width - b.mean_width).abs() <= 1e-11 * b.mean_width.abs().max(1.0));
        let se = (a.coverage * (1.0 - a.coverage) / a.replications as f64).sqrt();
        assert!((a.coverage_se - se).abs() <= 1e-11);
    }
    let errors = read_errors(std::fs::File::open(dir.path().join("errors.csv")).map(std::io::BufReader::new).unwrap())
        .unwrap();
    assert_eq!(errors.len(), 60 * 2);
    for (a, b) in errors.iter().zip(&report.errors) {
        assert!((a.standardized_error - b.standardized_error).abs() <= 1e-11 * b.standardized_error.abs().max(1.0));
    }
}

/// A symmetric two-sided interval is the intersection of the two one-sided
/// intervals at half the level, so per replication the misses add up.
#[test]
fn two_sided_coverage_splits_into_tails() {
    let cfg = small("scenario = bandit\npolicy = eps_greedy\ntheta_star = 0.3, 0.3\nalphas = 0.01, 0.02, 0.1, 0.2");
    let report = run_experiment_with_threads(&cfg, 2).unwrap();
    for method in [CiMethod::OdDirection, CiMethod::NaiveOls, CiMethod::NaiveOd] {
        for (two, one) in [(0.02, 0.01), (0.2, 0.1)] {
            let t = report.row(&cfg.name, method, two, Tail::TwoSided).unwrap().coverage;
            let l = report.row(&cfg.name, method, one, Tail::Lower).unwrap().coverage;
            let u = report.row(&cfg.name, method, one, Tail::Upper).unwrap().coverage;
            assert!((t - (l + u - 1.0)).abs() < 1e-12, "{method:?} {two}: {t} vs {l} + {u} - 1");
        }
    }
}

#[test]
fn report_has_every_cell() {
    let cfg = small("scenario = linear_bandit\ntheta_star = 0.3, 0.3\ntargets = 1, 2\nmethods = od_direction, naive_ols");
    let report = run_experiment_with_threads(&cfg, 2).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * cfg.alphas.len() * 3);
    assert!(report.row("linear_bandit:theta2", CiMethod::NaiveOls, 0.05, Tail::Upper).is_some());
    assert_eq!(report.replications.len(), 60);
}

#[test]
fn unimplemented_method_is_dropped() {
    let cfg = small("scenario = bandit\ntheta_star = 0.3, 0.3\nmethods = od_direction, w_decorrelation");
    let report = run_experiment_with_threads(&cfg, 1).unwrap();
    assert!(report.rows.iter().all(|r| r.method == CiMethod::OdDirection));
}

#[test]
fn tails_satisfy_frechet_bound() {
    for lines in ["scenario = bandit\npolicy = ucb\ntheta_star = 0.3, 0.3", "scenario = ar1\ntheta_star = 1"] {
        let cfg = small(lines);
        let report = run_experiment_with_threads(&cfg, 2).unwrap();
        for r in report.rows.iter().filter(|r| r.tail == Tail::TwoSided) {
            let l = report.row(&r.scenario, r.method, r.alpha, Tail::Lower).unwrap().coverage;
            let u = report.row(&r.scenario, r.method, r.alpha, Tail::Upper).unwrap().coverage;
            assert!(r.coverage >= (l + u - 1.0).max(0.0) - 1e-12, "{r:?}");
        }
    }
}
