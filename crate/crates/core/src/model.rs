//! Resources, bounds, requests and the per-step / per-run records.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::allocator::Diagnostics;
use crate::streams::{StreamError, StreamKind, StreamSpec};

/// Default caps on the resource and action dimensions.
pub const MAX_RESOURCES: usize = 10_000;
pub const MAX_ACTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("no resources")]
    NoResources,
    #[error("too many resources: {0} > {MAX_RESOURCES}")]
    TooManyResources(usize),
    #[error("rho[{index}] = {value} is not a positive finite number")]
    BadRho { index: usize, value: f64 },
    #[error("consumption matrix needs {expected} entries, got {got}")]
    MatrixShape { expected: usize, got: usize },
}

/// Per-period resource endowment `rho` over a horizon of `T` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    rho: Vec<f64>,
    horizon: usize,
    budget: Vec<f64>,
}

impl ResourceSpec {
    pub fn new(rho: Vec<f64>, horizon: usize) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::EmptyHorizon);
        }
        if rho.is_empty() {
            return Err(ModelError::NoResources);
        }
        if rho.len() > MAX_RESOURCES {
            return Err(ModelError::TooManyResources(rho.len()));
        }
        for (index, &value) in rho.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::BadRho { index, value });
            }
        }
        let budget = rho.iter().map(|r| horizon as f64 * r).collect();
        Ok(Self {
            rho,
            horizon,
            budget,
        })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Total budget `T * rho`.
    pub fn budget(&self) -> &[f64] {
        &self.budget
    }

    pub fn m(&self) -> usize {
        self.rho.len()
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn rho_lower(&self) -> f64 {
        self.rho.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Same endowment over a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ModelError> {
        Self::new(self.rho.clone(), horizon)
    }
}

/// Uniform bounds on per-period reward and consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemBounds {
    pub f_bar: f64,
    pub b_bar: f64,
    pub rho_bar: f64,
    pub rho_lower: f64,
}

impl ProblemBounds {
    pub fn new(f_bar: f64, b_bar: f64, resources: &ResourceSpec) -> Self {
        Self {
            f_bar,
            b_bar,
            rho_bar: resources.rho_bar(),
            rho_lower: resources.rho_lower(),
        }
    }

    /// Replace the rho envelope by the values of a concrete resource spec.
    pub fn for_resources(self, resources: &ResourceSpec) -> Self {
        Self {
            rho_bar: resources.rho_bar(),
            rho_lower: resources.rho_lower(),
            ..self
        }
    }
}

/// Dense row-major `m x d` matrix of nonnegative consumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionMatrix {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl ConsumptionMatrix {
    pub fn new(m: usize, d: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != m * d {
            return Err(ModelError::MatrixShape {
                expected: m * d,
                got: data.len(),
            });
        }
        Ok(Self { m, d, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { m: n, d: n, data }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinearDomain {
    /// Exactly one column is chosen (`||x||_1 = 1`).
    EqualitySimplex,
    /// At most one column is chosen.
    SubSimplex,
    /// A single take-or-leave item (`d = 1`).
    Binary,
}

impl LinearDomain {
    pub fn tag(self) -> &'static str {
        match self {
            LinearDomain::EqualitySimplex => "simplex",
            LinearDomain::SubSimplex => "subsimplex",
            LinearDomain::Binary => "binary",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "simplex" => Some(LinearDomain::EqualitySimplex),
            "subsimplex" => Some(LinearDomain::SubSimplex),
            "binary" => Some(LinearDomain::Binary),
            _ => None,
        }
    }
}

/// Linear request: choosing column `j` earns `reward[j]` and consumes column `j` of `consumption`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRequest {
    pub reward: Vec<f64>,
    pub consumption: ConsumptionMatrix,
    pub domain: LinearDomain,
}

/// One second-price auction; the single resource is the advertiser's budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionRequest {
    pub value: f64,
    pub competing_bid: f64,
}

/// Entropy-regularised randomized matching of one impression to `m` advertisers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingRequest {
    pub reward: Vec<f64>,
    pub lambda: f64,
}

/// MNL assortment offer; resource `j` is the inventory of product `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortmentRequest {
    pub revenue: Vec<f64>,
    pub utility: Vec<f64>,
    pub max_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Request {
    Linear(LinearRequest),
    Auction(AuctionRequest),
    Matching(MatchingRequest),
    Assortment(AssortmentRequest),
}

impl Request {
    /// Number of resources the request touches.
    pub fn resources(&self) -> usize {
        match self {
            Request::Linear(r) => r.consumption.rows(),
            Request::Auction(_) => 1,
            Request::Matching(r) => r.reward.len(),
            Request::Assortment(r) => r.revenue.len(),
        }
    }

    /// Whether realized consumption is random given the chosen action.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Request::Matching(_) | Request::Assortment(_))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Request::Linear(_) => "linear",
            Request::Auction(_) => "auction",
            Request::Matching(_) => "matching",
            Request::Assortment(_) => "assortment",
        }
    }
}

/// What the allocator committed to in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Void,
    /// Column of a linear request.
    Select(usize),
    Bid { bid: f64, win: bool },
    /// Assignment probabilities of a randomized matching.
    Matching(Vec<f64>),
    /// Offered products, in revenue order.
    Assortment(Vec<usize>),
}

impl Action {
    pub fn is_void(&self) -> bool {
        match self {
            Action::Void => true,
            Action::Bid { win, .. } => !win,
            Action::Assortment(s) => s.is_empty(),
            Action::Select(_) | Action::Matching(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub action: Action,
    pub expected_reward: f64,
    pub expected_consumption: Vec<f64>,
    pub realized_reward: f64,
    pub realized_consumption: Vec<f64>,
    /// `rho - b(x~)` for the unconstrained maximiser, in original units.
    pub subgradient: Vec<f64>,
    pub voided: bool,
    pub mu_before: Vec<f64>,
}

/// Result of one run of the allocator.
///
/// `steps` is empty unless full-path recording was requested; all other
/// fields are O(m) summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepOutcome>,
    pub horizon: usize,
    pub mu_avg: Vec<f64>,
    pub mu_final: Vec<f64>,
    pub stopping_time: usize,
    pub total_reward: f64,
    pub consumed: Vec<f64>,
    pub remaining_budget: Vec<f64>,
    pub voided: usize,
    pub diagnostics: Diagnostics,
}

/// First violated request condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub detail: String,
}

impl Violation {
    fn new(condition: &'static str, detail: impl Into<String>) -> Self {
        Self {
            condition,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

fn check_finite(name: &str, xs: &[f64]) -> Result<(), Violation> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Violation::new("finite parameters", format!("{name}[{i}] = {}", xs[i]))),
        None => Ok(()),
    }
}

fn check_range(
    condition: &'static str,
    name: &str,
    xs: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(), Violation> {
    match xs.iter().position(|&x| x < lo || x > hi) {
        Some(i) => Err(Violation::new(
            condition,
            format!("{name}[{i}] = {} outside [{lo}, {hi}]", xs[i]),
        )),
        None => Ok(()),
    }
}

/// Check a request against its invariants and the given bounds.
pub fn validate_request(req: &Request, bounds: &ProblemBounds) -> Result<(), Violation> {
    match req {
        Request::Linear(r) => {
            let (m, d) = (r.consumption.rows(), r.consumption.cols());
            if r.reward.len() != d || d == 0 || m == 0 {
                return Err(Violation::new(
                    "dimensions",
                    format!("reward has {} entries, matrix is {m}x{d}", r.reward.len()),
                ));
            }
            if d > MAX_ACTIONS || m > MAX_RESOURCES {
                return Err(Violation::new("dimensions", format!("{m}x{d} exceeds caps")));
            }
            if r.domain == LinearDomain::Binary && d != 1 {
                return Err(Violation::new("dimensions", "binary domain needs d = 1"));
            }
            check_finite("reward", &r.reward)?;
            check_finite("consumption", r.consumption.data())?;
            if let Some(i) = r.consumption.data().iter().position(|&c| c < 0.0) {
                return Err(Violation::new(
                    "consumption nonnegativity",
                    format!("entry {i} = {}", r.consumption.data()[i]),
                ));
            }
            check_range("reward bound", "reward", &r.reward, 0.0, bounds.f_bar)?;
            check_range(
                "consumption bound",
                "consumption",
                r.consumption.data(),
                0.0,
                bounds.b_bar,
            )
        }
        Request::Auction(a) => {
            check_finite("auction", &[a.value, a.competing_bid])?;
            if a.value < 0.0 {
                return Err(Violation::new("value nonnegativity", format!("v = {}", a.value)));
            }
            if a.competing_bid < 0.0 {
                return Err(Violation::new(
                    "consumption nonnegativity",
                    format!("d_comp = {}", a.competing_bid),
                ));
            }
            check_range("reward bound", "value", &[a.value], 0.0, bounds.f_bar)?;
            check_range("consumption bound", "competing_bid", &[a.competing_bid], 0.0, bounds.b_bar)
        }
        Request::Matching(r) => {
            if r.reward.is_empty() {
                return Err(Violation::new("dimensions", "no advertisers"));
            }
            check_finite("reward", &r.reward)?;
            if !(r.lambda > 0.0 && r.lambda.is_finite()) {
                return Err(Violation::new("lambda positive", format!("lambda = {}", r.lambda)));
            }
            if bounds.b_bar < 1.0 {
                return Err(Violation::new("consumption bound", "unit assignment exceeds b_bar"));
            }
            let entropy_cap = r.lambda * ((r.reward.len() + 1) as f64).ln();
            check_range(
                "reward bound",
                "reward",
                &r.reward,
                0.0,
                bounds.f_bar - entropy_cap,
            )
        }
        Request::Assortment(r) => {
            if r.revenue.is_empty() || r.revenue.len() != r.utility.len() {
                return Err(Violation::new(
                    "dimensions",
                    format!("{} revenues, {} utilities", r.revenue.len(), r.utility.len()),
                ));
            }
            check_finite("revenue", &r.revenue)?;
            check_finite("utility", &r.utility)?;
            if let Some(i) = r.revenue.iter().position(|&x| x < 0.0) {
                return Err(Violation::new(
                    "revenue nonnegativity",
                    format!("revenue[{i}] = {}", r.revenue[i]),
                ));
            }
            if bounds.b_bar < 1.0 {
                return Err(Violation::new("consumption bound", "unit purchase exceeds b_bar"));
            }
            check_range("reward bound", "revenue", &r.revenue, 0.0, bounds.f_bar)
        }
    }
}

/// Reward and consumption bounds valid for every request `spec` can emit.
///
/// `rho_bar` / `rho_lower` hold the envelope of per-period endowments the
/// generator can draw; [`ProblemBounds::for_resources`] narrows them to a
/// concrete draw.
pub fn bounds_for_stream(spec: &StreamSpec) -> Result<ProblemBounds, StreamError> {
    spec.kind.bounds()
}

impl StreamKind {
    pub(crate) fn bounds(&self) -> Result<ProblemBounds, StreamError> {
        use crate::streams::CorruptionMode;
        let b = match self {
            StreamKind::IidLp { r_bar, .. } => ProblemBounds {
                f_bar: *r_bar,
                b_bar: 1.0,
                rho_bar: 0.75,
                rho_lower: 0.125,
            },
            StreamKind::ErgodicMatching {
                m,
                lambda,
                reward_cap,
                rho,
                ..
            } => ProblemBounds {
                f_bar: reward_cap + lambda * ((m + 1) as f64).ln(),
                b_bar: 1.0,
                rho_bar: *rho,
                rho_lower: *rho,
            },
            StreamKind::AuctionIid { v_bar, rho, .. } => ProblemBounds {
                f_bar: *v_bar,
                b_bar: *v_bar,
                rho_bar: *rho,
                rho_lower: *rho,
            },
            StreamKind::AssortmentIid { r_bar, rho, .. } => ProblemBounds {
                f_bar: *r_bar,
                b_bar: 1.0,
                rho_bar: *rho,
                rho_lower: *rho,
            },
            StreamKind::AdversarialLb { .. } => ProblemBounds {
                f_bar: 1.0,
                b_bar: 1.0,
                rho_bar: 0.5,
                rho_lower: 0.5,
            },
            StreamKind::Periodic { base, .. } => base.bounds()?,
            StreamKind::Corrupted { base, mode, .. } => {
                let b = base.bounds()?;
                match mode {
                    CorruptionMode::ZeroReward | CorruptionMode::MaxConsumption => b,
                }
            }
        };
        Ok(b)
    }
}
