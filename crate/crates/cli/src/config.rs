//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment_id = "regret_vs_T"
//! master_seed = 7
//!
//! [trials]
//! model_draws = 10
//! runs_per_draw = 10
//!
//! [stream]
//! kind = "iid_lp"
//!
//! [[algorithm]]
//! name = "ogd"
//! reference_fn = "l2"
//! per_sqrt_m = true
//!
//! [sweep]
//! T = [250, 500, 1000]
//! m = [20]
//! d = [10]
//! s = [0.1, 1, 10]
//! ```
//!
//! Unknown keys are rejected. Sweep axes that do not apply to the stream kind
//! must be left out.

use std::path::PathBuf;

use online_alloc::model::LinearDomain;
use online_alloc::streams::{CorruptionMode, Placement, StreamKind, ValueDist};
use online_alloc::{ConsumptionMode, FeasibilityMode};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub master_seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also compute the exact offline optimum where enumeration is affordable.
    #[serde(default)]
    pub exact: bool,
    pub trials: Trials,
    pub stream: StreamConfig,
    #[serde(default)]
    pub corruption: Option<CorruptionConfig>,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub sweep: Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trials {
    pub model_draws: usize,
    pub runs_per_draw: usize,
}

impl Trials {
    pub fn total(&self) -> usize {
        self.model_draws * self.runs_per_draw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Simplex,
    Subsimplex,
    Binary,
}

impl From<DomainName> for LinearDomain {
    fn from(d: DomainName) -> Self {
        match d {
            DomainName::Simplex => LinearDomain::EqualitySimplex,
            DomainName::Subsimplex => LinearDomain::SubSimplex,
            DomainName::Binary => LinearDomain::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistConfig {
    Uniform { lo: f64, hi: f64 },
    Lognormal { mean_log: f64, sd_log: f64 },
}

impl From<DistConfig> for ValueDist {
    fn from(d: DistConfig) -> Self {
        match d {
            DistConfig::Uniform { lo, hi } => ValueDist::Uniform { lo, hi },
            DistConfig::Lognormal { mean_log, sd_log } => ValueDist::LogNormal { mean_log, sd_log },
        }
    }
}

fn r_bar_default() -> f64 {
    10.0
}
fn mean_log_default() -> f64 {
    -3.0
}
fn one() -> f64 {
    1.0
}
fn lambda_default() -> f64 {
    0.0002
}
fn matching_rho_default() -> f64 {
    0.1
}
fn domain_default() -> DomainName {
    DomainName::Simplex
}

/// Base generator. Fields named like a sweep axis give its value when the
/// axis is not swept.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StreamConfig {
    IidLp {
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        d: Option<usize>,
        #[serde(default = "r_bar_default")]
        r_bar: f64,
        #[serde(default = "domain_default")]
        domain: DomainName,
    },
    ErgodicMatching {
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default = "mean_log_default")]
        mean_log: f64,
        #[serde(default = "one")]
        sd_log: f64,
        #[serde(default = "lambda_default")]
        lambda: f64,
        #[serde(default = "one")]
        reward_cap: f64,
        #[serde(default = "matching_rho_default")]
        rho: f64,
    },
    Auction {
        v_bar: f64,
        values: DistConfig,
        bids: DistConfig,
        #[serde(default)]
        correlated: bool,
        rho: f64,
    },
    Assortment {
        #[serde(default)]
        m: Option<usize>,
        #[serde(default = "r_bar_default")]
        r_bar: f64,
        #[serde(default)]
        max_size: Option<usize>,
        rho: f64,
    },
    AdversarialLb {
        branch: u8,
        #[serde(default)]
        t_hat: Option<Count>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    ZeroReward,
    MaxConsumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementName {
    Burst,
    Random,
}

/// How corrupted requests are produced; the count comes from the `r` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub mode: ModeName,
    pub placement: PlacementName,
}

/// A count given directly or as a rule in the horizon `T`.
///
/// Rules are `[k*]base` with base `ceil_sqrt_T` or `T/n`, e.g. `"4*ceil_sqrt_T"`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Count {
    Fixed(usize),
    Rule(String),
}

impl Count {
    pub fn resolve(&self, horizon: usize) -> Result<usize, CliError> {
        let rule = match self {
            Count::Fixed(n) => return Ok(*n),
            Count::Rule(r) => r.trim(),
        };
        let bad = || CliError::Config(format!("bad count rule {rule:?}"));
        let (k, base) = match rule.split_once('*') {
            Some((k, b)) => (k.trim().parse::<usize>().map_err(|_| bad())?, b.trim()),
            None => (1, rule),
        };
        let v = if base == "ceil_sqrt_T" {
            (horizon as f64).sqrt().ceil() as usize
        } else if let Some(n) = base.strip_prefix("T/") {
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            horizon / n
        } else {
            return Err(bad());
        };
        Ok(k * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceName {
    L2,
    WeightedL2,
    Entropy,
    EntropyProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `eta = s / sqrt(T)`, or `s / sqrt(T m)` with `per_sqrt_m`.
    #[default]
    Scaled,
    /// Optimal step from the regret constants; the `s` axis is ignored.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityName {
    #[default]
    Void,
    Constrained,
}

impl From<FeasibilityName> for FeasibilityMode {
    fn from(f: FeasibilityName) -> Self {
        match f {
            FeasibilityName::Void => FeasibilityMode::VoidOnOverflow,
            FeasibilityName::Constrained => FeasibilityMode::ConstrainedArgmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumptionName {
    Expected,
    #[default]
    Realized,
}

impl From<ConsumptionName> for ConsumptionMode {
    fn from(c: ConsumptionName) -> Self {
        match c {
            ConsumptionName::Expected => ConsumptionMode::Expected,
            ConsumptionName::Realized => ConsumptionMode::Realized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    pub reference_fn: ReferenceName,
    #[serde(default)]
    pub step: StepRule,
    #[serde(default)]
    pub per_sqrt_m: bool,
    #[serde(default)]
    pub feasibility: FeasibilityName,
    #[serde(default)]
    pub consumption: ConsumptionName,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "T", default)]
    pub horizon: Vec<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub q: Vec<usize>,
    #[serde(default)]
    pub r: Vec<Count>,
    #[serde(default)]
    pub t_hat: Vec<Count>,
    #[serde(default)]
    pub s: Vec<f64>,
}

/// One stream configuration of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub horizon: usize,
    pub m: usize,
    pub d: usize,
    pub c: Option<f64>,
    pub q: Option<usize>,
    pub r: Option<usize>,
    pub t_hat: Option<usize>,
    pub kind: StreamKind,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.trials.model_draws == 0 || self.trials.runs_per_draw == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one [[algorithm]] is required".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        let s = &self.sweep;
        if s.horizon.iter().chain(&s.m).chain(&s.d).chain(&s.q).any(|&v| v == 0) {
            return bad("sweep values must be positive".into());
        }
        if s.s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("step scales must be positive".into());
        }
        if s.c.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return bad("AR coefficients must lie in [0, 1)".into());
        }
        if s.horizon.is_empty() {
            return bad("sweep.T is required".into());
        }
        let takes = |axis: &str| -> bool {
            matches!(
                (&self.stream, axis),
                (StreamConfig::IidLp { .. }, "m" | "d")
                    | (StreamConfig::ErgodicMatching { .. }, "m" | "c")
                    | (StreamConfig::Assortment { .. }, "m")
                    | (StreamConfig::AdversarialLb { .. }, "t_hat")
            )
        };
        for (axis, used) in [
            ("m", !s.m.is_empty()),
            ("d", !s.d.is_empty()),
            ("c", !s.c.is_empty()),
            ("t_hat", !s.t_hat.is_empty()),
        ] {
            if used && !takes(axis) {
                return bad(format!("sweep.{axis} does not apply to this stream kind"));
            }
        }
        if !s.r.is_empty() && self.corruption.is_none() {
            return bad("sweep.r needs a [corruption] table".into());
        }
        if s.r.is_empty() && self.corruption.is_some() {
            return bad("[corruption] needs sweep.r".into());
        }
        if matches!(self.stream, StreamConfig::AdversarialLb { t_hat: None, .. }) && s.t_hat.is_empty() {
            return bad("adversarial_lb needs t_hat".into());
        }
        // Surface rule errors before any work starts.
        self.points()?;
        Ok(())
    }

    fn base_value(&self, axis: &str) -> Option<usize> {
        match (&self.stream, axis) {
            (StreamConfig::IidLp { m, .. }, "m") => *m,
            (StreamConfig::IidLp { d, .. }, "d") => *d,
            (StreamConfig::ErgodicMatching { m, .. }, "m") => *m,
            (StreamConfig::Assortment { m, .. }, "m") => *m,
            _ => None,
        }
    }

    /// The cross product of all sweep axes, in a fixed order.
    pub fn points(&self) -> Result<Vec<SweepPoint>, CliError> {
        let s = &self.sweep;
        let axis = |v: &Vec<usize>, name: &str| -> Vec<Option<usize>> {
            if v.is_empty() {
                vec![self.base_value(name)]
            } else {
                v.iter().map(|&x| Some(x)).collect()
            }
        };
        let ms = axis(&s.m, "m");
        let ds = axis(&s.d, "d");
        let cs: Vec<Option<f64>> = if s.c.is_empty() {
            match &self.stream {
                StreamConfig::ErgodicMatching { c, .. } => vec![Some(c.unwrap_or(0.0))],
                _ => vec![None],
            }
        } else {
            s.c.iter().map(|&x| Some(x)).collect()
        };
        let qs: Vec<Option<usize>> = if s.q.is_empty() { vec![None] } else { s.q.iter().map(|&x| Some(x)).collect() };
        let rs: Vec<Option<&Count>> = if s.r.is_empty() { vec![None] } else { s.r.iter().map(Some).collect() };
        let ts: Vec<Option<&Count>> = if s.t_hat.is_empty() {
            match &self.stream {
                StreamConfig::AdversarialLb { t_hat, .. } => vec![t_hat.as_ref()],
                _ => vec![None],
            }
        } else {
            s.t_hat.iter().map(Some).collect()
        };
        let mut out = Vec::new();
        for &t in &s.horizon {
            for &m in &ms {
                for &d in &ds {
                    for &c in &cs {
                        for &q in &qs {
                            for r in &rs {
                                for th in &ts {
                                    let r = r.map(|x| x.resolve(t)).transpose()?;
                                    let th = th.map(|x| x.resolve(t)).transpose()?;
                                    let kind = self.kind_at(m, d, c, q, r, th)?;
                                    out.push(SweepPoint {
                                        horizon: t,
                                        m: kind.m(),
                                        d: kind.d(),
                                        c,
                                        q,
                                        r,
                                        t_hat: th,
                                        kind,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn kind_at(
        &self,
        m: Option<usize>,
        d: Option<usize>,
        c: Option<f64>,
        q: Option<usize>,
        r: Option<usize>,
        t_hat: Option<usize>,
    ) -> Result<StreamKind, CliError> {
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| CliError::Config(format!("stream needs {name}")));
        let base = match &self.stream {
            StreamConfig::IidLp { r_bar, domain, .. } => StreamKind::IidLp {
                m: need(m, "m")?,
                d: need(d, "d")?,
                r_bar: *r_bar,
                domain: (*domain).into(),
            },
            StreamConfig::ErgodicMatching {
                mean_log,
                sd_log,
                lambda,
                reward_cap,
                rho,
                ..
            } => StreamKind::ErgodicMatching {
                m: need(m, "m")?,
                ar_coeff: c.unwrap_or(0.0),
                mean_log: *mean_log,
                sd_log: *sd_log,
                lambda: *lambda,
                reward_cap: *reward_cap,
                rho: *rho,
            },
            StreamConfig::Auction {
                v_bar,
                values,
                bids,
                correlated,
                rho,
            } => StreamKind::AuctionIid {
                v_bar: *v_bar,
                values: (*values).into(),
                bids: (*bids).into(),
                correlated: *correlated,
                rho: *rho,
            },
            StreamConfig::Assortment {
                r_bar, max_size, rho, ..
            } => StreamKind::AssortmentIid {
                m: need(m, "m")?,
                r_bar: *r_bar,
                max_size: *max_size,
                rho: *rho,
            },
            StreamConfig::AdversarialLb { branch, .. } => StreamKind::AdversarialLb {
                t_hat: need(t_hat, "t_hat")?,
                branch: *branch,
            },
        };
        let mut kind = base;
        if let Some(q) = q {
            kind = StreamKind::Periodic { q, base: Box::new(kind) };
        }
        if let (Some(count), Some(cc)) = (r, &self.corruption) {
            kind = StreamKind::Corrupted {
                base: Box::new(kind),
                count,
                mode: match cc.mode {
                    ModeName::ZeroReward => CorruptionMode::ZeroReward,
                    ModeName::MaxConsumption => CorruptionMode::MaxConsumption,
                },
                placement: match cc.placement {
                    PlacementName::Burst => Placement::Burst,
                    PlacementName::Random => Placement::Random,
                },
            };
        }
        Ok(kind)
    }

    /// Step scales to run; `[1]` when the axis is empty.
    pub fn scales(&self) -> Vec<f64> {
        if self.sweep.s.is_empty() {
            vec![1.0]
        } else {
            self.sweep.s.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
experiment_id = "x"
master_seed = 3

[trials]
model_draws = 2
runs_per_draw = 3

[stream]
kind = "iid_lp"
domain = "subsimplex"

[[algorithm]]
name = "ogd"
reference_fn = "l2"
per_sqrt_m = true

[[algorithm]]
name = "mwu"
reference_fn = "entropy"

[sweep]
T = [100, 200]
m = [2, 4]
d = [3]
s = [0.1, 1]
"#;

    #[test]
    fn parses_and_expands_sweep() {
        let cfg = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(cfg.trials.total(), 6);
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].horizon, pts[1].m, pts[1].d), (100, 4, 3));
        assert_eq!(cfg.scales(), vec![0.1, 1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASIC.replace("master_seed = 3", "master_seed = 3\nbogus = 1");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = BASIC.replace("domain = \"subsimplex\"", "domain = \"subsimplex\"\nlambda = 1");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = BASIC.replace("per_sqrt_m = true", "per_sqrt_m = true\nspeed = 2");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn inapplicable_axis_is_rejected() {
        let text = BASIC.replace("d = [3]", "d = [3]\nc = [0.5]");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::parse(&BASIC.replace("T = [100, 200]", "T = [0]")).is_err());
        assert!(ExperimentConfig::parse(&BASIC.replace("model_draws = 2", "model_draws = 0")).is_err());
        assert!(ExperimentConfig::parse(&BASIC.replace("s = [0.1, 1]", "s = [-1]")).is_err());
    }

    #[test]
    fn count_rules() {
        assert_eq!(Count::Rule("ceil_sqrt_T".into()).resolve(2000).unwrap(), 45);
        assert_eq!(Count::Rule("4*ceil_sqrt_T".into()).resolve(2000).unwrap(), 180);
        assert_eq!(Count::Rule("T/8".into()).resolve(2000).unwrap(), 250);
        assert_eq!(Count::Fixed(3).resolve(10).unwrap(), 3);
        assert!(Count::Rule("sqrt".into()).resolve(10).is_err());
    }

    #[test]
    fn corruption_axis_wraps_stream() {
        let text = BASIC.replace("s = [0.1, 1]", "r = [0, \"T/8\"]")
            + "\n[corruption]\nmode = \"zero_reward\"\nplacement = \"random\"\n";
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[1].r, Some(12));
        assert!(matches!(pts[1].kind, StreamKind::Corrupted { count: 12, .. }));
    }
}
