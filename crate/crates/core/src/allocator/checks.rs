//! Per-trajectory invariant checks.

use std::fmt;

use crate::mirror::{self, ReferenceFunction};
use crate::model::{ProblemBounds, ResourceSpec, Trajectory};

/// Slack added to the iterate-stability bound.
pub const STABILITY_SLACK: f64 = 1e-9;
/// Relative slack on the online mirror descent regret bound.
pub const OMD_RELATIVE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckError {
    pub check: &'static str,
    pub detail: String,
}

impl CheckError {
    fn new(check: &'static str, detail: String) -> Self {
        Self { check, detail }
    }
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

impl std::error::Error for CheckError {}

/// Cumulative realized consumption never exceeds the budget, at any prefix.
///
/// Uses the per-step log when present, the final totals otherwise (consumption
/// is nonnegative, so the final total dominates every prefix).
pub fn check_feasibility(traj: &Trajectory, resources: &ResourceSpec) -> Result<(), CheckError> {
    let budget = resources.budget();
    if traj.steps.is_empty() {
        for (j, (c, b)) in traj.consumed.iter().zip(budget).enumerate() {
            if c > b {
                return Err(CheckError::new(
                    "feasibility",
                    format!("resource {j}: consumed {c} > budget {b}"),
                ));
            }
        }
        return Ok(());
    }
    let mut cum = vec![0.0; budget.len()];
    for (t, step) in traj.steps.iter().enumerate() {
        for (j, x) in step.realized_consumption.iter().enumerate() {
            if *x < 0.0 {
                return Err(CheckError::new(
                    "feasibility",
                    format!("step {}: negative consumption {x} of resource {j}", t + 1),
                ));
            }
            cum[j] += x;
            if cum[j] > budget[j] {
                return Err(CheckError::new(
                    "feasibility",
                    format!("step {}: resource {j} at {} > budget {}", t + 1, cum[j], budget[j]),
                ));
            }
        }
    }
    Ok(())
}

/// First `t` in `0..=T` at which some resource has `consumed + b_bar >= rho T`, or `T`.
///
/// Returns `None` when the trajectory has no per-step log.
pub fn recompute_stopping_time(
    traj: &Trajectory,
    resources: &ResourceSpec,
    bounds: &ProblemBounds,
) -> Option<usize> {
    if traj.steps.is_empty() {
        return None;
    }
    let budget = resources.budget();
    let hit = |cum: &[f64]| cum.iter().zip(budget).any(|(c, b)| c + bounds.b_bar >= *b);
    let mut cum = vec![0.0; budget.len()];
    if hit(&cum) {
        return Some(0);
    }
    for (t, step) in traj.steps.iter().enumerate() {
        for (c, x) in cum.iter_mut().zip(&step.realized_consumption) {
            *c += x;
        }
        if hit(&cum) {
            return Some(t + 1);
        }
    }
    Some(traj.horizon)
}

pub fn check_stopping_time(
    traj: &Trajectory,
    resources: &ResourceSpec,
    bounds: &ProblemBounds,
) -> Result<(), CheckError> {
    match recompute_stopping_time(traj, resources, bounds) {
        None => Err(CheckError::new("stopping time", "no per-step log recorded".into())),
        Some(t) if t == traj.stopping_time => Ok(()),
        Some(t) => Err(CheckError::new(
            "stopping time",
            format!("stored {} but log gives {t}", traj.stopping_time),
        )),
    }
}

fn sigma(traj: &Trajectory) -> f64 {
    let d = &traj.diagnostics;
    mirror::strong_convexity(&d.reference, d.rho.len(), &d.bounds).sigma
}

/// Largest allowed `||mu_{t+1} - mu_t||_1`.
pub fn iterate_stability_bound(traj: &Trajectory) -> f64 {
    let d = &traj.diagnostics;
    std::f64::consts::SQRT_2 / sigma(traj) * d.eta * (d.bounds.b_bar + d.bounds.rho_bar)
}

/// Why the stability bound does not apply to `traj`, if it does not.
///
/// The entropy modulus `sigma` holds on the box `mu <= mu_max` only; once an
/// iterate leaves the box the bound has no premise.
pub fn stability_precondition(traj: &Trajectory) -> Option<String> {
    let d = &traj.diagnostics;
    if !matches!(d.reference, ReferenceFunction::NegEntropy) {
        return None;
    }
    let mu_max = mirror::mu_max(&d.bounds, &d.rho);
    d.mu_peak
        .iter()
        .zip(&mu_max)
        .position(|(p, cap)| p > cap)
        .map(|j| format!("precondition: mu[{j}] reached {} > mu_max {}", d.mu_peak[j], mu_max[j]))
}

/// Every dual step moves at most `(sqrt 2 / sigma) eta (b_bar + rho_bar)` in l1.
pub fn check_iterate_stability(traj: &Trajectory) -> Result<(), CheckError> {
    let bound = iterate_stability_bound(traj);
    let moved = traj.diagnostics.max_step_l1;
    if moved <= bound + STABILITY_SLACK {
        Ok(())
    } else {
        Err(CheckError::new(
            "iterate stability",
            format!("step of l1 size {moved} exceeds {bound}"),
        ))
    }
}

/// Online mirror descent regret against every pivot dual, up to the stopping time.
///
/// `sum_{t <= tau} (mu_t - mu).g_t <= G^2 eta tau / (2 sigma) + V_h(mu, mu_1) / eta`
/// with `G = b_bar + rho_bar`.
pub fn check_omd_regret(traj: &Trajectory) -> Result<(), CheckError> {
    let d = &traj.diagnostics;
    let g = d.bounds.b_bar + d.bounds.rho_bar;
    let s = sigma(traj);
    let tau = d.stopping_time as f64;
    for (k, pivot) in mirror::pivots(&d.bounds, &d.rho).iter().enumerate() {
        let lhs = d.omd_inner - crate::numeric::dot(pivot, &d.omd_subgradient_sum);
        let v = mirror::bregman(&d.reference, pivot, &d.mu_initial)
            .map_err(|e| CheckError::new("omd regret", e.to_string()))?;
        let rhs = g * g * d.eta * tau / (2.0 * s) + v / d.eta;
        if lhs > rhs + OMD_RELATIVE_SLACK * rhs.abs().max(1.0) {
            return Err(CheckError::new(
                "omd regret",
                format!("pivot {k}: {lhs} > {rhs}"),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoppingBoundOutcome {
    Holds,
    Skipped(String),
    Violated(String),
}

impl StoppingBoundOutcome {
    pub fn is_violated(&self) -> bool {
        matches!(self, StoppingBoundOutcome::Violated(_))
    }
}

/// Multipliers stay below `mu_max = f_bar / rho + 1` and resources are not
/// depleted too early.
///
/// Applies when the reference function acts on the whole orthant, every
/// request admitted the zero action, `eta <= sigma_2 / b_bar` and
/// `mu_1 <= mu_max`; otherwise reports why it was skipped.
pub fn check_stopping_time_bound(traj: &Trajectory) -> StoppingBoundOutcome {
    let d = &traj.diagnostics;
    if matches!(d.reference, ReferenceFunction::NegEntropyProjected { .. }) {
        return StoppingBoundOutcome::Skipped("precondition: dual domain is not the orthant".into());
    }
    if !d.zero_action_available {
        return StoppingBoundOutcome::Skipped("precondition: zero action not always available".into());
    }
    let sigma2 = mirror::sigma2(&d.reference, &d.bounds);
    let cap = sigma2 / d.bounds.b_bar;
    if d.eta > cap {
        return StoppingBoundOutcome::Skipped(format!("precondition: eta {} > sigma2/b_bar {cap}", d.eta));
    }
    let mu_max = mirror::mu_max(&d.bounds, &d.rho);
    if d.mu_initial.iter().zip(&mu_max).any(|(a, b)| a > b) {
        return StoppingBoundOutcome::Skipped("precondition: mu_1 exceeds mu_max".into());
    }
    for (j, (p, cap)) in d.mu_peak.iter().zip(&mu_max).enumerate() {
        if p > cap {
            return StoppingBoundOutcome::Violated(format!("clause (a): mu[{j}] reached {p} > {cap}"));
        }
    }
    let spread = mu_max
        .iter()
        .zip(&d.mu_initial)
        .enumerate()
        .map(|(j, (hi, lo))| d.reference.gradient(j, *hi) - d.reference.gradient(j, *lo))
        .fold(f64::MIN, f64::max);
    let lower = d.bounds.rho_lower;
    let bound = spread / (d.eta * lower) + d.bounds.b_bar / lower;
    let gap = (traj.horizon - d.stopping_time) as f64;
    if gap > bound {
        return StoppingBoundOutcome::Violated(format!("clause (b): T - tau = {gap} > {bound}"));
    }
    StoppingBoundOutcome::Holds
}
