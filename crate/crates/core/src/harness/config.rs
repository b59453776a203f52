//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` and blank lines are ignored; lists are comma
//! separated. Every key has a default, and [`ExperimentConfig::to_text`]
//! prints the fully resolved configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::CiMethod;
use crate::simulators::{BanditPolicy, NoiseModel};
use crate::tuning::ScheduleKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Bandit,
    Ar1,
    LinearBandit,
    Adversarial,
    FixedDesign,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bandit => "bandit",
            Self::Ar1 => "ar1",
            Self::LinearBandit => "linear_bandit",
            Self::Adversarial => "adversarial",
            Self::FixedDesign => "fixed_design",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Bandit, Self::Ar1, Self::LinearBandit, Self::Adversarial, Self::FixedDesign]
            .into_iter()
            .find(|x| x.as_str() == s)
    }

    pub fn default_schedule(self) -> ScheduleKind {
        match self {
            Self::Bandit => ScheduleKind::Bandit,
            Self::Ar1 => ScheduleKind::Ar1,
            Self::LinearBandit => ScheduleKind::Exploration,
            Self::Adversarial | Self::FixedDesign => ScheduleKind::General,
        }
    }
}

/// Exploration probability of the linear bandit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExplorationRate {
    /// The smallest constant rate meeting the sufficient-exploration condition.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseVariance {
    /// Mean squared least-squares residual.
    Estimate,
    /// The simulation's true `sigma2`.
    Known,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Label written to the `scenario` column.
    pub name: String,
    pub scenario: Scenario,
    pub policy: BanditPolicy,
    pub theta_star: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub methods: Vec<CiMethod>,
    /// Zero-based coordinates whose intervals are reported.
    pub targets: Vec<usize>,
    pub seed: u64,
    pub augment: bool,
    pub noise: NoiseModel,
    pub noise_variance: NoiseVariance,
    pub schedule: ScheduleKind,
    pub lambda_ridge: f64,
    pub theta_bound: f64,
    pub contexts: usize,
    pub exploration: ExplorationRate,
    /// Dimension of the adversarial and fixed designs.
    pub dim: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "bandit".into(),
            scenario: Scenario::Bandit,
            policy: BanditPolicy::EpsGreedy { eps: 0.1 },
            theta_star: vec![0.3, 0.3],
            n: 1000,
            replications: 1000,
            alphas: vec![0.01, 0.02, 0.05, 0.1, 0.2],
            methods: vec![CiMethod::OdDirection, CiMethod::NaiveOls, CiMethod::NaiveOd, CiMethod::Concentration],
            targets: vec![0],
            seed: 0,
            augment: false,
            noise: NoiseModel::gaussian(1.0),
            noise_variance: NoiseVariance::Estimate,
            schedule: ScheduleKind::Bandit,
            lambda_ridge: 0.1,
            theta_bound: 1.0,
            contexts: 50,
            exploration: ExplorationRate::Auto,
            dim: 3,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config { line, msg: format!("{key}: cannot parse {v:?}") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(line, key, s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut eps = 0.1;
        let mut ucb_c = 1.0;
        let mut policy_name = "eps_greedy".to_string();
        let mut noise_kind = "gaussian".to_string();
        let mut sigma2 = 1.0;
        let mut schedule: Option<ScheduleKind> = None;
        let mut name: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config { line, msg: format!("expected key = value, got {content:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            let cfg_err = |e: Error| Error::Config { line, msg: e.to_string() };
            match key {
                "name" => name = Some(value.to_string()),
                "scenario" => {
                    cfg.scenario = Scenario::parse(value)
                        .ok_or_else(|| Error::Config { line, msg: format!("unknown scenario {value:?}") })?
                }
                "policy" => policy_name = value.to_string(),
                "eps" => eps = parse_num(line, key, value)?,
                "ucb_c" => ucb_c = parse_num(line, key, value)?,
                "theta_star" => cfg.theta_star = parse_list(line, key, value)?,
                "n" => cfg.n = parse_num(line, key, value)?,
                "replications" => cfg.replications = parse_num(line, key, value)?,
                "alphas" => cfg.alphas = parse_list(line, key, value)?,
                "methods" => {
                    cfg.methods = value.split(',').map(|m| CiMethod::parse(m.trim())).collect::<Result<_>>().map_err(cfg_err)?
                }
                "targets" => {
                    let one_based: Vec<usize> = parse_list(line, key, value)?;
                    if one_based.contains(&0) {
                        return Err(Error::Config { line, msg: "targets are 1-based coordinates".into() });
                    }
                    cfg.targets = one_based.into_iter().map(|k| k - 1).collect();
                }
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "augment" => cfg.augment = parse_num(line, key, value)?,
                "noise" => noise_kind = value.to_string(),
                "sigma2" => sigma2 = parse_num(line, key, value)?,
                "noise_variance" => {
                    cfg.noise_variance = match value {
                        "estimate" => NoiseVariance::Estimate,
                        "known" => NoiseVariance::Known,
                        _ => return Err(Error::Config { line, msg: format!("noise_variance: {value:?}") }),
                    }
                }
                "schedule" => schedule = Some(ScheduleKind::parse(value).map_err(cfg_err)?),
                "lambda_ridge" => cfg.lambda_ridge = parse_num(line, key, value)?,
                "theta_bound" => cfg.theta_bound = parse_num(line, key, value)?,
                "contexts" => cfg.contexts = parse_num(line, key, value)?,
                "exploration" => {
                    cfg.exploration = if value == "auto" {
                        ExplorationRate::Auto
                    } else {
                        ExplorationRate::Fixed(parse_num(line, key, value)?)
                    }
                }
                "dim" => cfg.dim = parse_num(line, key, value)?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                _ => return Err(Error::Config { line, msg: format!("unknown key {key:?}") }),
            }
        }
        cfg.policy = match policy_name.as_str() {
            "eps_greedy" => BanditPolicy::EpsGreedy { eps },
            "ucb" => BanditPolicy::Ucb { c: ucb_c },
            "thompson" => BanditPolicy::Thompson,
            other => return Err(Error::Config { line: 0, msg: format!("unknown policy {other:?}") }),
        };
        cfg.noise = NoiseModel::parse(&noise_kind, sigma2).map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        cfg.schedule = schedule.unwrap_or_else(|| cfg.scenario.default_schedule());
        cfg.name = name.unwrap_or_else(|| cfg.scenario.as_str().to_string());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("alphas must be a nonempty list inside (0, 1)".into());
        }
        if let BanditPolicy::EpsGreedy { eps } = self.policy {
            if !(0.0..=1.0).contains(&eps) {
                return bad(format!("eps must lie in [0, 1], got {eps}"));
            }
        }
        if !(self.noise.sigma2 >= 0.0) {
            return bad("sigma2 must be nonnegative".into());
        }
        if self.n < 16 {
            return bad(format!("n = {} is below the minimum of 16", self.n));
        }
        let d = self.dimension();
        if let Some(k) = self.targets.iter().find(|k| **k >= d) {
            return bad(format!("target coordinate {} exceeds dimension {d}", k + 1));
        }
        if self.scenario == Scenario::Ar1 && self.theta_star.len() != 1 {
            return bad("ar1 needs a scalar theta_star".into());
        }
        Ok(())
    }

    /// Parameter dimension implied by the scenario.
    pub fn dimension(&self) -> usize {
        match self.scenario {
            Scenario::Adversarial => self.dim,
            _ => self.theta_star.len(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (policy, eps, ucb_c) = match self.policy {
            BanditPolicy::EpsGreedy { eps } => ("eps_greedy", eps, 1.0),
            BanditPolicy::Ucb { c } => ("ucb", 0.1, c),
            BanditPolicy::Thompson => ("thompson", 0.1, 1.0),
        };
        let noise = match self.noise.kind {
            crate::simulators::NoiseKind::Gaussian => "gaussian",
            crate::simulators::NoiseKind::ScaledUniform => "scaled-uniform",
        };
        let exploration = match self.exploration {
            ExplorationRate::Auto => "auto".to_string(),
            ExplorationRate::Fixed(e) => e.to_string(),
        };
        let targets: Vec<usize> = self.targets.iter().map(|k| k + 1).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "scenario = {}", self.scenario.as_str());
        let _ = writeln!(s, "policy = {policy}");
        let _ = writeln!(s, "eps = {eps}");
        let _ = writeln!(s, "ucb_c = {ucb_c}");
        let _ = writeln!(s, "theta_star = {}", join(&self.theta_star));
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "alphas = {}", join(&self.alphas));
        let _ = writeln!(s, "methods = {}", methods.join(","));
        let _ = writeln!(s, "targets = {}", join(&targets));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "augment = {}", self.augment);
        let _ = writeln!(s, "noise = {noise}");
        let _ = writeln!(s, "sigma2 = {}", self.noise.sigma2);
        let _ = writeln!(
            s,
            "noise_variance = {}",
            if self.noise_variance == NoiseVariance::Known { "known" } else { "estimate" }
        );
        let _ = writeln!(s, "schedule = {}", self.schedule);
        let _ = writeln!(s, "lambda_ridge = {}", self.lambda_ridge);
        let _ = writeln!(s, "theta_bound = {}", self.theta_bound);
        let _ = writeln!(s, "contexts = {}", self.contexts);
        let _ = writeln!(s, "exploration = {exploration}");
        let _ = writeln!(s, "dim = {}", self.dim);
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse(
            "# comment\nscenario = ar1\ntheta_star = 1\nreplications = 10 # trailing\nalphas = 0.05, 0.1\npolicy = ucb\nucb_c = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::Ar1);
        assert_eq!(cfg.schedule, ScheduleKind::Ar1);
        assert_eq!(cfg.name, "ar1");
        assert_eq!(cfg.theta_star, vec![1.0]);
        assert_eq!(cfg.alphas, vec![0.05, 0.1]);
        assert_eq!(cfg.policy, BanditPolicy::Ucb { c: 2.0 });
        assert_eq!(cfg.replications, 10);
    }

    #[test]
    fn round_trip_through_text() {
        let cfg = ExperimentConfig::parse("scenario = linear_bandit\ntargets = 1,2\nexploration = 0.2\nmethods = od_direction,naive_ols\n")
            .unwrap();
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.targets, vec![0, 1]);
        assert_eq!(again.exploration, ExplorationRate::Fixed(0.2));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(ExperimentConfig::parse("n = 100\nbogus = 1\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("n = x\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("no equals sign\n"), Err(Error::Config { line: 1, .. })));
        assert!(ExperimentConfig::parse("replications = 0\n").is_err());
        assert!(ExperimentConfig::parse("alphas = 0.05, 1.5\n").is_err());
        assert!(ExperimentConfig::parse("targets = 3\n").is_err());
        assert!(ExperimentConfig::parse("methods = magic\n").is_err());
    }
}
