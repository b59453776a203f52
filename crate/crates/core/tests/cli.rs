use std::process::Command;

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adaptive-od"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.cfg");
    std::fs::write(&cfg, "scenario = bandit\npolicy = thompson\ntheta_star = 0.3, 0.3\nn = 400\n").unwrap();
    let data = dir.path().join("data.csv");
    let st = cli().args(["simulate", "--config"]).arg(&cfg).args(["--seed", "4", "--out"]).arg(&data).status().unwrap();
    assert!(st.success());
    let meta = std::fs::read_to_string(dir.path().join("data.csv.json")).unwrap();
    assert!(meta.contains("thompson") && meta.contains("\"seed\": \"4\""));

    let out = cli().arg("fit").arg(&data).args(["--schedule", "bandit"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("n = 400, d = 2"));
    assert_eq!(lines[1], "coordinate,theta_ls,theta_od,ols_lo,ols_hi,od_lo,od_hi");
    assert_eq!(lines.len(), 4);
    let f: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
    assert!(f[5] <= f[2] && f[2] <= f[6] && f[3] <= f[1] && f[1] <= f[4]);
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.cfg");
    std::fs::write(&cfg, "name = small_ar\nscenario = ar1\ntheta_star = 1\nn = 200\nreplications = 20\n").unwrap();
    let out = dir.path().join("out");
    let st = cli().args(["experiment", "--config"]).arg(&cfg).args(["--threads", "2", "--out"]).arg(&out).status().unwrap();
    assert!(st.success());
    for f in ["coverage.csv", "errors.csv", "config.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let resolved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(resolved.contains("schedule = ar1"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "scenario = bandit\nreplications = many\n").unwrap();
    let out = cli().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn check_passes() {
    let out = cli().arg("check").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}
