//! The online allocation loop.
//!
//! Each period the allocator
//!
//! 1. solves `x~ = argmax f(x) - mu.b(x)` for the arriving request,
//! 2. commits `x~` only if its worst-case consumption fits in the remaining
//!    budget (otherwise the zero action, or the best action that fits),
//! 3. forms the subgradient `g = rho - b(x~)` from the unconstrained `x~`,
//! 4. takes a mirror step on the multipliers.
//!
//! With the projected entropy the multipliers live in rho-normalised
//! coordinates (`mu'_j = rho_j mu_j`, unit endowments); [`Diagnostics`]
//! reports everything in those internal coordinates while the trajectory's
//! public fields are in the original units.

mod checks;

pub use checks::{
    check_feasibility, check_iterate_stability, check_omd_regret, check_stopping_time,
    check_stopping_time_bound, iterate_stability_bound, recompute_stopping_time, stability_precondition,
    CheckError, StoppingBoundOutcome,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mirror::{self, DualVector, MirrorError, ReferenceFunction};
use crate::model::{Action, ProblemBounds, Request, ResourceSpec, StepOutcome, Trajectory};
use crate::numeric::CompensatedSum;
use crate::subproblems::{self, Headroom, PrimalSolution, SolveError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    Fixed(f64),
    /// `sqrt(C3 / (C2 T))` from the regret constants.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialDual {
    Default,
    /// Starting prices in original units.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityMode {
    /// Commit `x~` if it fits, else the zero action.
    VoidOnOverflow,
    /// Commit `x~` if it fits, else the best action that fits.
    ConstrainedArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsumptionMode {
    /// Budgets are charged the expected consumption of the committed action.
    Expected,
    /// Matching and assortment outcomes are sampled and charged as realized.
    Realized,
}

/// Deliberate defects used to confirm that the invariant checks catch bugs.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    FlipSubgradientSign,
    SkipGate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocatorConfig {
    pub reference: ReferenceFunction,
    pub step_size: StepSize,
    pub initial: InitialDual,
    pub feasibility: FeasibilityMode,
    pub consumption: ConsumptionMode,
    pub record_full_path: bool,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl AllocatorConfig {
    pub fn new(reference: ReferenceFunction, step_size: StepSize) -> Self {
        Self {
            reference,
            step_size,
            initial: InitialDual::Default,
            feasibility: FeasibilityMode::VoidOnOverflow,
            consumption: ConsumptionMode::Expected,
            record_full_path: false,
            fault: None,
        }
    }

    pub fn with_full_path(mut self) -> Self {
        self.record_full_path = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocatorError {
    #[error(transparent)]
    Mirror(#[from] MirrorError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("request has {got} resources, allocator has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("stream has {got} requests for a horizon of {expected}")]
    Length { expected: usize, got: usize },
    #[error("horizon exhausted after {0} steps")]
    HorizonExhausted(usize),
    #[error("budget of resource {resource} overdrawn at step {step}")]
    BudgetUnderflow { step: usize, resource: usize },
    #[error("initial dual has {got} components, expected {expected}")]
    InitialDimension { expected: usize, got: usize },
}

/// Internal-coordinate summaries used by the invariant checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub reference: ReferenceFunction,
    /// `mu' = scale * mu`; all ones except under the projected entropy.
    pub scale: Vec<f64>,
    pub bounds: ProblemBounds,
    pub rho: Vec<f64>,
    pub eta: f64,
    pub mu_initial: Vec<f64>,
    /// Componentwise maximum over all iterates `mu_1 .. mu_{T+1}`.
    pub mu_peak: Vec<f64>,
    pub max_step_l1: f64,
    /// Stopping time computed with the internal bounds.
    pub stopping_time: usize,
    /// `sum_{t <= stopping_time} mu_t . g_t` for the true subgradients.
    pub omd_inner: f64,
    /// `sum_{t <= stopping_time} g_t`.
    pub omd_subgradient_sum: Vec<f64>,
    /// Every request so far admitted the zero action.
    pub zero_action_available: bool,
}

/// Coordinates the mirror step works in.
#[derive(Debug, Clone)]
struct Geometry {
    scale: Vec<f64>,
    rho: Vec<f64>,
    bounds: ProblemBounds,
}

impl Geometry {
    fn new(h: &ReferenceFunction, resources: &ResourceSpec, bounds: &ProblemBounds) -> Self {
        let rho = resources.rho();
        match h {
            ReferenceFunction::NegEntropyProjected { .. } => {
                let lower = resources.rho_lower();
                Self {
                    scale: rho.to_vec(),
                    rho: vec![1.0; rho.len()],
                    bounds: ProblemBounds {
                        f_bar: bounds.f_bar,
                        b_bar: bounds.b_bar / lower,
                        rho_bar: 1.0,
                        rho_lower: 1.0,
                    },
                }
            }
            _ => Self {
                scale: vec![1.0; rho.len()],
                rho: rho.to_vec(),
                bounds: bounds.for_resources(resources),
            },
        }
    }
}

/// Stateful allocator for one horizon.
#[derive(Debug, Clone)]
pub struct Allocator {
    cfg: AllocatorConfig,
    resources: ResourceSpec,
    bounds: ProblemBounds,
    geo: Geometry,
    eta: f64,
    mu: Vec<f64>,
    mu_orig: Vec<f64>,
    mu_sum: Vec<CompensatedSum>,
    consumed: Vec<f64>,
    reward: CompensatedSum,
    t: usize,
    stopping_time: Option<usize>,
    internal_stop: Option<usize>,
    voided: usize,
    steps: Vec<StepOutcome>,
    diag: Diagnostics,
    omd_inner: CompensatedSum,
}

impl Allocator {
    pub fn new(
        cfg: AllocatorConfig,
        resources: &ResourceSpec,
        bounds: &ProblemBounds,
    ) -> Result<Self, AllocatorError> {
        let m = resources.m();
        cfg.reference.validate(m)?;
        let bounds = bounds.for_resources(resources);
        let geo = Geometry::new(&cfg.reference, resources, &bounds);
        let mu = match &cfg.initial {
            InitialDual::Default => mirror::default_initial(&cfg.reference, m).into_inner(),
            InitialDual::Explicit(v) => {
                if v.len() != m {
                    return Err(AllocatorError::InitialDimension {
                        expected: m,
                        got: v.len(),
                    });
                }
                let scaled: Vec<f64> = v.iter().zip(&geo.scale).map(|(a, s)| a * s).collect();
                DualVector::new(scaled)?.into_inner()
            }
        };
        if cfg.reference.is_entropy() {
            if let Some(index) = mu.iter().position(|&x| !(x > 0.0)) {
                return Err(MirrorError::Domain {
                    index,
                    value: mu[index],
                }
                .into());
            }
        }
        let eta = match cfg.step_size {
            StepSize::Fixed(e) => {
                if !(e > 0.0 && e.is_finite()) {
                    return Err(MirrorError::BadStepSize(e).into());
                }
                e
            }
            StepSize::Auto => {
                let c = mirror::theorem_constants(
                    &cfg.reference,
                    &geo.bounds,
                    &geo.rho,
                    &DualVector::new(mu.clone())?,
                )?;
                mirror::optimal_stepsize(&c, resources.horizon())?
            }
        };
        let mu_orig = mu.iter().zip(&geo.scale).map(|(a, s)| a / s).collect();
        let diag = Diagnostics {
            reference: cfg.reference.clone(),
            scale: geo.scale.clone(),
            bounds: geo.bounds,
            rho: geo.rho.clone(),
            eta,
            mu_initial: mu.clone(),
            mu_peak: mu.clone(),
            max_step_l1: 0.0,
            stopping_time: resources.horizon(),
            omd_inner: 0.0,
            omd_subgradient_sum: vec![0.0; m],
            zero_action_available: true,
        };
        let mut a = Self {
            cfg,
            resources: resources.clone(),
            bounds,
            geo,
            eta,
            mu,
            mu_orig,
            mu_sum: vec![CompensatedSum::new(); m],
            consumed: vec![0.0; m],
            reward: CompensatedSum::new(),
            t: 0,
            stopping_time: None,
            internal_stop: None,
            voided: 0,
            steps: Vec::new(),
            diag,
            omd_inner: CompensatedSum::new(),
        };
        a.update_stopping_times();
        Ok(a)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Current prices in original units.
    pub fn mu(&self) -> &[f64] {
        &self.mu_orig
    }

    pub fn consumed(&self) -> &[f64] {
        &self.consumed
    }

    pub fn periods_done(&self) -> usize {
        self.t
    }

    fn update_stopping_times(&mut self) {
        let budget = self.resources.budget();
        if self.stopping_time.is_none() {
            let hit = self
                .consumed
                .iter()
                .zip(budget)
                .any(|(c, b)| c + self.bounds.b_bar >= *b);
            if hit {
                self.stopping_time = Some(self.t);
            }
        }
        if self.internal_stop.is_none() {
            let b_int = self.geo.bounds.b_bar;
            let hit = self
                .consumed
                .iter()
                .zip(budget)
                .zip(&self.geo.scale)
                .any(|((c, b), s)| c / s + b_int >= b / s);
            if hit {
                self.internal_stop = Some(self.t);
            }
        }
    }

    /// Process one request.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        req: &Request,
        rng: &mut R,
    ) -> Result<StepOutcome, AllocatorError> {
        let m = self.resources.m();
        if self.t >= self.resources.horizon() {
            return Err(AllocatorError::HorizonExhausted(self.t));
        }
        if req.resources() != m {
            return Err(AllocatorError::Dimension {
                expected: m,
                got: req.resources(),
            });
        }
        if let Request::Linear(l) = req {
            if l.domain == crate::model::LinearDomain::EqualitySimplex {
                self.diag.zero_action_available = false;
            }
        }

        let tilde = subproblems::solve(req, &self.mu_orig)?;
        let room = Headroom {
            consumed: &self.consumed,
            budget: self.resources.budget(),
        };
        let fits = room.fits_all(&subproblems::worst_case_consumption(req, &tilde));
        let skip_gate = self.cfg.fault == Some(Fault::SkipGate);
        let committed: PrimalSolution = if fits || skip_gate {
            tilde.clone()
        } else {
            match self.cfg.feasibility {
                FeasibilityMode::VoidOnOverflow => PrimalSolution::void(m),
                FeasibilityMode::ConstrainedArgmax => {
                    subproblems::solve_within(req, &self.mu_orig, room)?
                }
            }
        };
        let voided = !fits && !skip_gate && committed_is_zero(&committed);

        let (realized_reward, realized_consumption) = if voided {
            (0.0, vec![0.0; m])
        } else {
            self.realize(req, &committed, rng)?
        };

        // Subgradient in original units, then in internal coordinates.
        let g: Vec<f64> = self
            .resources
            .rho()
            .iter()
            .zip(&tilde.consumption)
            .map(|(r, b)| r - b)
            .collect();
        let g_int: Vec<f64> = g.iter().zip(&self.geo.scale).map(|(x, s)| x / s).collect();

        if self.internal_stop.is_none() {
            self.omd_inner.add(crate::numeric::dot(&g_int, &self.mu));
            for (acc, x) in self.diag.omd_subgradient_sum.iter_mut().zip(&g_int) {
                *acc += x;
            }
        }
        for (acc, &x) in self.mu_sum.iter_mut().zip(&self.mu) {
            acc.add(x);
        }

        let outcome = StepOutcome {
            action: if voided { Action::Void } else { committed.action.clone() },
            expected_reward: if voided { 0.0 } else { committed.reward },
            expected_consumption: if voided { vec![0.0; m] } else { committed.consumption.clone() },
            realized_reward,
            realized_consumption: realized_consumption.clone(),
            subgradient: g,
            voided,
            mu_before: self.mu_orig.clone(),
        };

        // Budget accounting.
        for (i, (c, x)) in self.consumed.iter_mut().zip(&realized_consumption).enumerate() {
            *c += x;
            if self.cfg.fault.is_none() && *c > self.resources.budget()[i] {
                return Err(AllocatorError::BudgetUnderflow {
                    step: self.t + 1,
                    resource: i,
                });
            }
        }
        self.reward.add(realized_reward);
        if voided {
            self.voided += 1;
        }

        // Dual update.
        let step_g: Vec<f64> = if self.cfg.fault == Some(Fault::FlipSubgradientSign) {
            g_int.iter().map(|x| -x).collect()
        } else {
            g_int
        };
        let before = self.mu.clone();
        mirror::mirror_step_in_place(&self.cfg.reference, &mut self.mu, &step_g, self.eta)?;
        let moved = crate::numeric::l1_distance(&before, &self.mu);
        self.diag.max_step_l1 = self.diag.max_step_l1.max(moved);
        for (p, &x) in self.diag.mu_peak.iter_mut().zip(&self.mu) {
            *p = p.max(x);
        }
        for ((o, &x), s) in self.mu_orig.iter_mut().zip(&self.mu).zip(&self.geo.scale) {
            *o = x / s;
        }

        self.t += 1;
        self.update_stopping_times();
        if self.cfg.record_full_path {
            self.steps.push(outcome.clone());
        }
        Ok(outcome)
    }

    fn realize<R: Rng + ?Sized>(
        &self,
        req: &Request,
        sol: &PrimalSolution,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>), AllocatorError> {
        let m = self.resources.m();
        if self.cfg.consumption == ConsumptionMode::Expected || !req.is_stochastic() {
            return Ok((sol.reward, sol.consumption.clone()));
        }
        let mut b = vec![0.0; m];
        match (req, &sol.action) {
            (Request::Matching(r), Action::Matching(x)) => {
                let bonus = r.lambda * subproblems::matching_entropy(x);
                let pick = subproblems::sample_matching(x, rng)?;
                let base = match pick {
                    Some(j) => {
                        b[j] = 1.0;
                        r.reward[j]
                    }
                    None => 0.0,
                };
                Ok((base + bonus, b))
            }
            (Request::Assortment(r), Action::Assortment(s)) => {
                match subproblems::sample_assortment(r, s, rng) {
                    Some(j) => {
                        b[j] = 1.0;
                        Ok((r.revenue[j], b))
                    }
                    None => Ok((0.0, b)),
                }
            }
            _ => Ok((sol.reward, sol.consumption.clone())),
        }
    }

    /// Close the run and return its trajectory.
    pub fn finish(mut self) -> Trajectory {
        let t = self.t.max(1) as f64;
        let mu_avg = self
            .mu_sum
            .iter()
            .zip(&self.geo.scale)
            .map(|(s, sc)| s.value() / t / sc)
            .collect();
        let budget = self.resources.budget();
        let remaining_budget = budget.iter().zip(&self.consumed).map(|(b, c)| b - c).collect();
        self.diag.omd_inner = self.omd_inner.value();
        self.diag.stopping_time = self.internal_stop.unwrap_or(self.resources.horizon()).min(self.t);
        Trajectory {
            steps: self.steps,
            horizon: self.resources.horizon(),
            mu_avg,
            mu_final: self.mu_orig,
            stopping_time: self.stopping_time.unwrap_or(self.resources.horizon()).min(self.t),
            total_reward: self.reward.value(),
            consumed: self.consumed,
            remaining_budget,
            voided: self.voided,
            diagnostics: self.diag,
        }
    }
}

fn committed_is_zero(sol: &PrimalSolution) -> bool {
    sol.reward == 0.0 && sol.consumption.iter().all(|&x| x == 0.0)
}

/// Run the allocator over a full horizon.
pub fn run<R: Rng + ?Sized>(
    requests: &[Request],
    cfg: &AllocatorConfig,
    resources: &ResourceSpec,
    bounds: &ProblemBounds,
    rng: &mut R,
) -> Result<Trajectory, AllocatorError> {
    if requests.len() != resources.horizon() {
        return Err(AllocatorError::Length {
            expected: resources.horizon(),
            got: requests.len(),
        });
    }
    let mut a = Allocator::new(cfg.clone(), resources, bounds)?;
    for req in requests {
        a.step(req, rng)?;
    }
    Ok(a.finish())
}
