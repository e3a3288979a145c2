//! Seeded request generators.
//!
//! A [`StreamSpec`] fixes a generator, its parameters, a horizon and two
//! seeds: `model_seed` drives the one-off model parameters (endowments,
//! latent weights) and `trial_seed` drives the per-period draws. Generation is
//! a pure function of the spec.

mod text;

pub use text::{parse_requests, write_requests};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{
    AssortmentRequest, AuctionRequest, ConsumptionMatrix, LinearDomain, LinearRequest,
    MatchingRequest, ProblemBounds, Request, ResourceSpec, MAX_ACTIONS, MAX_RESOURCES,
};
use crate::seed::{self, label};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StreamError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cycle length {q} does not divide horizon {horizon}")]
    CycleLength { q: usize, horizon: usize },
    #[error("corruption count {count} exceeds horizon {horizon}")]
    CorruptionCount { count: usize, horizon: usize },
    #[error("{0} is not supported for this generator")]
    Unsupported(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn invalid(msg: impl Into<String>) -> StreamError {
    StreamError::InvalidParameter(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValueDist {
    Uniform { lo: f64, hi: f64 },
    /// Lognormal, clipped at the generator's ceiling.
    LogNormal { mean_log: f64, sd_log: f64 },
}

impl ValueDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ValueDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
            ValueDist::LogNormal { mean_log, sd_log } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (mean_log + sd_log * z).exp()
            }
        }
    }

    fn validate(&self, ceiling: f64) -> Result<(), StreamError> {
        match *self {
            ValueDist::Uniform { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= ceiling) => {
                Err(invalid(format!("uniform [{lo}, {hi}] not within [0, {ceiling}]")))
            }
            ValueDist::LogNormal { mean_log, sd_log }
                if !(mean_log.is_finite() && sd_log > 0.0 && sd_log.is_finite()) =>
            {
                Err(invalid("lognormal needs finite mean and positive sd"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorruptionMode {
    /// Reward set to zero, consumption kept.
    ZeroReward,
    /// Every consumption entry set to `b_bar`, reward kept.
    MaxConsumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    /// Contiguous block starting at `min(T/4, T - r)`.
    Burst,
    /// Uniformly random distinct positions.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamKind {
    /// Online LP with Bernoulli consumption and linear-Gaussian rewards.
    IidLp {
        m: usize,
        d: usize,
        r_bar: f64,
        domain: LinearDomain,
    },
    /// Matching whose click-through rates follow a log-AR(1) process.
    ErgodicMatching {
        m: usize,
        ar_coeff: f64,
        mean_log: f64,
        sd_log: f64,
        lambda: f64,
        reward_cap: f64,
        rho: f64,
    },
    /// Budgeted bidding in second-price auctions.
    AuctionIid {
        v_bar: f64,
        values: ValueDist,
        bids: ValueDist,
        correlated: bool,
        rho: f64,
    },
    /// MNL assortment offers with per-product inventories.
    AssortmentIid {
        m: usize,
        r_bar: f64,
        max_size: Option<usize>,
        rho: f64,
    },
    /// i.i.d. cycles of length `q` with slot-dependent reward scaling.
    Periodic { q: usize, base: Box<StreamKind> },
    /// Base stream with `count` requests replaced.
    Corrupted {
        base: Box<StreamKind>,
        count: usize,
        mode: CorruptionMode,
        placement: Placement,
    },
    /// Three-stage single-resource instance with `rho = 1/2`.
    AdversarialLb { t_hat: usize, branch: u8 },
}

impl StreamKind {
    pub fn iid_lp(m: usize, d: usize) -> Self {
        StreamKind::IidLp {
            m,
            d,
            r_bar: 10.0,
            domain: LinearDomain::EqualitySimplex,
        }
    }

    pub fn ergodic_matching(m: usize, ar_coeff: f64) -> Self {
        StreamKind::ErgodicMatching {
            m,
            ar_coeff,
            mean_log: -3.0,
            sd_log: 1.0,
            lambda: 0.0002,
            reward_cap: 1.0,
            rho: 0.1,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            StreamKind::IidLp { domain, .. } => format!("iid_lp_{}", domain.tag()),
            StreamKind::ErgodicMatching { ar_coeff, .. } => format!("ergodic_matching_c{ar_coeff}"),
            StreamKind::AuctionIid { .. } => "auction_iid".into(),
            StreamKind::AssortmentIid { .. } => "assortment_iid".into(),
            StreamKind::Periodic { q, base } => format!("periodic_q{q}_{}", base.tag()),
            StreamKind::Corrupted { base, count, .. } => format!("corrupted_r{count}_{}", base.tag()),
            StreamKind::AdversarialLb { branch, .. } => format!("adversarial_lb_b{branch}"),
        }
    }

    /// Number of resources.
    pub fn m(&self) -> usize {
        match self {
            StreamKind::IidLp { m, .. }
            | StreamKind::ErgodicMatching { m, .. }
            | StreamKind::AssortmentIid { m, .. } => *m,
            StreamKind::AuctionIid { .. } | StreamKind::AdversarialLb { .. } => 1,
            StreamKind::Periodic { base, .. } | StreamKind::Corrupted { base, .. } => base.m(),
        }
    }

    /// Number of primal columns (1 where not meaningful).
    pub fn d(&self) -> usize {
        match self {
            StreamKind::IidLp { d, .. } => *d,
            StreamKind::Periodic { base, .. } | StreamKind::Corrupted { base, .. } => base.d(),
            _ => 1,
        }
    }

    fn validate(&self, horizon: usize) -> Result<(), StreamError> {
        let dims = |m: usize| {
            if m == 0 || m > MAX_RESOURCES {
                Err(invalid(format!("m = {m} outside 1..={MAX_RESOURCES}")))
            } else {
                Ok(())
            }
        };
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {x} must be positive")))
            }
        };
        match self {
            StreamKind::IidLp { m, d, r_bar, domain } => {
                dims(*m)?;
                if *d == 0 || *d > MAX_ACTIONS {
                    return Err(invalid(format!("d = {d} outside 1..={MAX_ACTIONS}")));
                }
                if *domain == LinearDomain::Binary && *d != 1 {
                    return Err(invalid("binary domain needs d = 1"));
                }
                positive("r_bar", *r_bar)
            }
            StreamKind::ErgodicMatching {
                m,
                ar_coeff,
                mean_log,
                sd_log,
                lambda,
                reward_cap,
                rho,
            } => {
                dims(*m)?;
                if !(0.0..1.0).contains(ar_coeff) {
                    return Err(invalid(format!("AR coefficient {ar_coeff} outside [0, 1)")));
                }
                if !mean_log.is_finite() {
                    return Err(invalid("mean_log must be finite"));
                }
                positive("sd_log", *sd_log)?;
                positive("lambda", *lambda)?;
                positive("reward_cap", *reward_cap)?;
                positive("rho", *rho)
            }
            StreamKind::AuctionIid {
                v_bar,
                values,
                bids,
                rho,
                ..
            } => {
                positive("v_bar", *v_bar)?;
                positive("rho", *rho)?;
                values.validate(*v_bar)?;
                bids.validate(*v_bar)
            }
            StreamKind::AssortmentIid {
                m,
                r_bar,
                max_size,
                rho,
            } => {
                dims(*m)?;
                if *max_size == Some(0) {
                    return Err(invalid("max_size must be at least 1"));
                }
                positive("r_bar", *r_bar)?;
                positive("rho", *rho)
            }
            StreamKind::Periodic { q, base } => {
                if *q == 0 || !horizon.is_multiple_of(*q) {
                    return Err(StreamError::CycleLength { q: *q, horizon });
                }
                if matches!(**base, StreamKind::Periodic { .. } | StreamKind::Corrupted { .. }) {
                    return Err(StreamError::Unsupported("nested periodic/corrupted base"));
                }
                base.validate(horizon)
            }
            StreamKind::Corrupted {
                base, count, mode, ..
            } => {
                if *count > horizon {
                    return Err(StreamError::CorruptionCount {
                        count: *count,
                        horizon,
                    });
                }
                if *mode == CorruptionMode::MaxConsumption
                    && matches!(**base, StreamKind::ErgodicMatching { .. } | StreamKind::AssortmentIid { .. })
                {
                    return Err(StreamError::Unsupported("max-consumption corruption of unit-demand requests"));
                }
                if matches!(**base, StreamKind::Corrupted { .. }) {
                    return Err(StreamError::Unsupported("nested corruption"));
                }
                base.validate(horizon)
            }
            StreamKind::AdversarialLb { t_hat, branch } => {
                if 2 * t_hat > horizon {
                    return Err(invalid(format!("t_hat = {t_hat} exceeds T/2")));
                }
                if !matches!(branch, 1 | 2) {
                    return Err(invalid(format!("branch {branch} not in {{1, 2}}")));
                }
                Ok(())
            }
        }
    }
}

/// Generator identity, parameters, horizon and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub model_seed: u64,
    pub trial_seed: u64,
    pub horizon: usize,
}

/// A realised request sequence with its resources and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStream {
    pub requests: Vec<Request>,
    pub resources: ResourceSpec,
    pub bounds: ProblemBounds,
    /// Positions replaced by a corruption wrapper, increasing.
    pub corrupted: Vec<usize>,
    /// Seed for sampling stochastic outcomes while running on this stream.
    pub outcome_seed: u64,
}

impl StreamSpec {
    pub fn new(kind: StreamKind, model_seed: u64, trial_seed: u64, horizon: usize) -> Self {
        Self {
            kind,
            model_seed,
            trial_seed,
            horizon,
        }
    }

    pub fn generate(&self) -> Result<GeneratedStream, StreamError> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        self.kind.validate(self.horizon)?;
        let mut corrupted = Vec::new();
        let (requests, rho) = generate_kind(&self.kind, self, &mut corrupted)?;
        let resources = ResourceSpec::new(rho, self.horizon).map_err(|e| invalid(e.to_string()))?;
        let bounds = self.kind.bounds()?.for_resources(&resources);
        Ok(GeneratedStream {
            requests,
            resources,
            bounds,
            corrupted,
            outcome_seed: seed::derive(self.trial_seed, label::OUTCOMES),
        })
    }
}

fn model_rng(spec: &StreamSpec) -> ChaCha8Rng {
    seed::rng(seed::derive(spec.model_seed, label::MODEL))
}

fn period_rng(spec: &StreamSpec) -> ChaCha8Rng {
    seed::rng(seed::derive(spec.trial_seed, label::PERIODS))
}

type Generated = (Vec<Request>, Vec<f64>);

fn generate_kind(
    kind: &StreamKind,
    spec: &StreamSpec,
    corrupted: &mut Vec<usize>,
) -> Result<Generated, StreamError> {
    let t = spec.horizon;
    match kind {
        StreamKind::IidLp { m, d, r_bar, domain } => Ok(gen_iid_lp(*m, *d, *r_bar, *domain, spec)),
        StreamKind::ErgodicMatching { .. } => Ok(gen_ergodic_matching(kind, spec)),
        StreamKind::AuctionIid {
            v_bar,
            values,
            bids,
            correlated,
            rho,
        } => Ok(gen_auction(*v_bar, values, bids, *correlated, *rho, spec)),
        StreamKind::AssortmentIid {
            m,
            r_bar,
            max_size,
            rho,
        } => Ok(gen_assortment(*m, *r_bar, *max_size, *rho, spec)),
        StreamKind::AdversarialLb { t_hat, branch } => Ok(gen_lower_bound(*t_hat, *branch, t)),
        StreamKind::Periodic { q, base } => {
            let (mut reqs, rho) = generate_kind(base, spec, corrupted)?;
            let mut rng = seed::rng(seed::derive(spec.trial_seed, label::CYCLES));
            for cycle in reqs.chunks_mut(*q) {
                let a: f64 = rng.random();
                for (s, req) in cycle.iter_mut().enumerate() {
                    let phase = 2.0 * std::f64::consts::PI * s as f64 / *q as f64;
                    scale_reward(req, 1.0 - a * (1.0 - phase.cos()) / 4.0);
                }
            }
            Ok((reqs, rho))
        }
        StreamKind::Corrupted {
            base,
            count,
            mode,
            placement,
        } => {
            let (mut reqs, rho) = generate_kind(base, spec, corrupted)?;
            let b_bar = base.bounds()?.b_bar;
            let mut positions: Vec<usize> = match placement {
                Placement::Burst => {
                    let start = (t / 4).min(t - count);
                    (start..start + count).collect()
                }
                Placement::Random => {
                    let mut rng = seed::rng(seed::derive(spec.trial_seed, label::CORRUPTION));
                    index::sample(&mut rng, t, *count).into_vec()
                }
            };
            positions.sort_unstable();
            for &p in &positions {
                corrupt(&mut reqs[p], *mode, b_bar);
            }
            *corrupted = positions;
            Ok((reqs, rho))
        }
    }
}

/// Online LP: `p_i = (1 + alpha_i)/2`, `alpha ~ Beta(1, 3)`, `rho = beta * p`
/// with `beta ~ U(0.25, 0.75)`, unit-norm Gaussian `theta`; each period
/// `c_ij ~ Bernoulli(p_i)` and `r = clip(theta^T c + delta, 0, r_bar)`.
fn gen_iid_lp(m: usize, d: usize, r_bar: f64, domain: LinearDomain, spec: &StreamSpec) -> Generated {
    let mut mrng = model_rng(spec);
    let beta_dist = Beta::new(1.0, 3.0).expect("valid beta parameters");
    let p: Vec<f64> = (0..m).map(|_| (1.0 + beta_dist.sample(&mut mrng)) / 2.0).collect();
    let beta: Vec<f64> = (0..m).map(|_| mrng.random_range(0.25..=0.75)).collect();
    let rho: Vec<f64> = p.iter().zip(&beta).map(|(p, b)| p * b).collect();
    let mut theta: Vec<f64> = (0..m).map(|_| mrng.sample(rand_distr::StandardNormal)).collect();
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut theta {
        *x /= norm;
    }

    let mut rng = period_rng(spec);
    let reqs = (0..spec.horizon)
        .map(|_| {
            let mut c = vec![0.0; m * d];
            for i in 0..m {
                for j in 0..d {
                    if rng.random::<f64>() < p[i] {
                        c[i * d + j] = 1.0;
                    }
                }
            }
            let delta: f64 = rng.sample(rand_distr::StandardNormal);
            let reward = (0..d)
                .map(|j| {
                    let s: f64 = (0..m).map(|i| theta[i] * c[i * d + j]).sum();
                    (s + delta).clamp(0.0, r_bar)
                })
                .collect();
            Request::Linear(LinearRequest {
                reward,
                consumption: ConsumptionMatrix::new(m, d, c).expect("shape"),
                domain,
            })
        })
        .collect();
    (reqs, rho)
}

/// Per-advertiser log-AR(1) click-through rates started at the stationary law.
fn gen_ergodic_matching(kind: &StreamKind, spec: &StreamSpec) -> Generated {
    let StreamKind::ErgodicMatching {
        m,
        ar_coeff: c,
        mean_log,
        sd_log,
        lambda,
        reward_cap,
        rho,
    } = *kind
    else {
        unreachable!()
    };
    let mut mrng = model_rng(spec);
    let means: Vec<f64> = (0..m).map(|_| mean_log + mrng.random_range(-0.5..=0.5)).collect();
    let mut rng = period_rng(spec);
    let innov_sd = sd_log * (1.0 - c * c).sqrt();
    let mut state: Vec<f64> = means
        .iter()
        .map(|mu| Normal::new(*mu, sd_log).expect("sd > 0").sample(&mut rng))
        .collect();
    let mut reqs = Vec::with_capacity(spec.horizon);
    for t in 0..spec.horizon {
        if t > 0 {
            for (x, mu) in state.iter_mut().zip(&means) {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                *x = c * *x + (1.0 - c) * mu + innov_sd * z;
            }
        }
        reqs.push(Request::Matching(MatchingRequest {
            reward: state.iter().map(|x| x.exp().min(reward_cap)).collect(),
            lambda,
        }));
    }
    (reqs, vec![rho; m])
}

fn gen_auction(
    v_bar: f64,
    values: &ValueDist,
    bids: &ValueDist,
    correlated: bool,
    rho: f64,
    spec: &StreamSpec,
) -> Generated {
    let mut rng = period_rng(spec);
    let reqs = (0..spec.horizon)
        .map(|_| {
            let common = if correlated {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (0.5 * z).exp()
            } else {
                1.0
            };
            let v = (values.sample(&mut rng) * common).min(v_bar);
            let d = (bids.sample(&mut rng) * common).min(v_bar);
            Request::Auction(AuctionRequest {
                value: v,
                competing_bid: d,
            })
        })
        .collect();
    (reqs, vec![rho])
}

fn gen_assortment(
    m: usize,
    r_bar: f64,
    max_size: Option<usize>,
    rho: f64,
    spec: &StreamSpec,
) -> Generated {
    let mut mrng = model_rng(spec);
    let revenue: Vec<f64> = (0..m).map(|_| mrng.random_range(0.1 * r_bar..=r_bar)).collect();
    let base: Vec<f64> = (0..m).map(|_| mrng.sample(rand_distr::StandardNormal)).collect();
    let mut rng = period_rng(spec);
    let reqs = (0..spec.horizon)
        .map(|_| {
            let utility = base
                .iter()
                .map(|u| {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    u + 0.5 * z
                })
                .collect();
            Request::Assortment(AssortmentRequest {
                revenue: revenue.clone(),
                utility,
                max_size,
            })
        })
        .collect();
    (reqs, vec![rho; m])
}

fn binary(reward: f64, consumption: f64) -> Request {
    Request::Linear(LinearRequest {
        reward: vec![reward],
        consumption: ConsumptionMatrix::new(1, 1, vec![consumption]).expect("shape"),
        domain: LinearDomain::Binary,
    })
}

fn gen_lower_bound(t_hat: usize, branch: u8, horizon: usize) -> Generated {
    let second = if branch == 1 { 0.0 } else { 1.0 };
    let mut reqs = Vec::with_capacity(horizon);
    reqs.extend((0..t_hat).map(|_| binary(0.5, 1.0)));
    reqs.extend((0..t_hat).map(|_| binary(second, 1.0)));
    reqs.extend((0..horizon - 2 * t_hat).map(|_| binary(1.0, 0.5)));
    (reqs, vec![0.5])
}

fn scale_reward(req: &mut Request, factor: f64) {
    match req {
        Request::Linear(r) => r.reward.iter_mut().for_each(|x| *x *= factor),
        Request::Auction(a) => a.value *= factor,
        Request::Matching(r) => r.reward.iter_mut().for_each(|x| *x *= factor),
        Request::Assortment(r) => r.revenue.iter_mut().for_each(|x| *x *= factor),
    }
}

fn corrupt(req: &mut Request, mode: CorruptionMode, b_bar: f64) {
    match mode {
        CorruptionMode::ZeroReward => scale_reward(req, 0.0),
        CorruptionMode::MaxConsumption => match req {
            Request::Linear(r) => r.consumption.data_mut().iter_mut().for_each(|x| *x = b_bar),
            Request::Auction(a) => a.competing_bid = b_bar,
            Request::Matching(_) | Request::Assortment(_) => {}
        },
    }
}

/// Largest `b_j(x) / rho_j` over the realised requests, floored at 1.
pub fn alpha_star(requests: &[Request], rho: &[f64]) -> f64 {
    let mut a = 1.0_f64;
    for req in requests {
        match req {
            Request::Linear(r) => {
                let c = &r.consumption;
                for i in 0..c.rows() {
                    for j in 0..c.cols() {
                        a = a.max(c.get(i, j) / rho[i]);
                    }
                }
            }
            Request::Auction(x) => a = a.max(x.competing_bid / rho[0]),
            Request::Matching(_) | Request::Assortment(_) => {
                a = a.max(rho.iter().map(|r| 1.0 / r).fold(0.0, f64::max));
            }
        }
    }
    a
}
