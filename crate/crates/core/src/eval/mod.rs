//! Offline benchmarks and run metrics.
//!
//! The dual function `D(mu) = sum_t f*_t(mu) + T rho.mu` is an upper bound on
//! the offline optimum for every `mu >= 0`; evaluating it at the run's average
//! multipliers gives the regret estimate used throughout. Exact oracles cover
//! small instances.

mod stats;

pub use stats::{aggregate, aggregate_by, fit_growth, GrowthFit, Summary};

use serde::{Deserialize, Serialize};

use crate::model::{LinearDomain, ProblemBounds, Request, ResourceSpec, Trajectory};
use crate::numeric::CompensatedSum;
use crate::subproblems::{self, SolveError};

/// Largest action-profile count accepted by [`opt_exact_enumeration`].
pub const MAX_PROFILES: f64 = 1_048_576.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("instance has {0} action profiles, more than 2^20")]
    TooLarge(f64),
    #[error("request {0} has no finite action set")]
    InfiniteActions(usize),
    #[error("no feasible action profile")]
    Infeasible,
    #[error("operation needs a single resource, got {0}")]
    NotSingleResource(usize),
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("empty group")]
    EmptyGroup,
}

/// `D(mu | gamma) = sum_t f*_t(mu) + T rho.mu`.
pub fn dual_bound(requests: &[Request], mu: &[f64], resources: &ResourceSpec) -> Result<f64, SolveError> {
    let mut s = CompensatedSum::new();
    for req in requests {
        s.add(subproblems::conjugate(req, mu)?);
    }
    s.add(crate::numeric::dot(resources.budget(), mu));
    Ok(s.value())
}

/// Finite action list `(reward, consumption)` of a request.
fn actions(req: &Request, idx: usize) -> Result<Vec<(f64, Vec<f64>)>, EvalError> {
    match req {
        Request::Linear(r) => {
            let m = r.consumption.rows();
            let mut out: Vec<(f64, Vec<f64>)> = (0..r.reward.len())
                .map(|j| (r.reward[j], r.consumption.column(j)))
                .collect();
            if r.domain != LinearDomain::EqualitySimplex {
                out.push((0.0, vec![0.0; m]));
            }
            Ok(out)
        }
        Request::Auction(a) => Ok(vec![
            (a.value - a.competing_bid, vec![a.competing_bid]),
            (0.0, vec![0.0]),
        ]),
        Request::Matching(_) | Request::Assortment(_) => Err(EvalError::InfiniteActions(idx)),
    }
}

/// Exact offline optimum by exhaustive search with bound pruning.
pub fn opt_exact_enumeration(requests: &[Request], resources: &ResourceSpec) -> Result<f64, EvalError> {
    let sets: Vec<Vec<(f64, Vec<f64>)>> = requests
        .iter()
        .enumerate()
        .map(|(i, r)| actions(r, i))
        .collect::<Result<_, _>>()?;
    let profiles: f64 = sets.iter().map(|s| s.len() as f64).product();
    if profiles > MAX_PROFILES {
        return Err(EvalError::TooLarge(profiles));
    }
    // Optimistic completion value for pruning.
    let mut tail = vec![0.0; sets.len() + 1];
    for i in (0..sets.len()).rev() {
        let best = sets[i].iter().map(|a| a.0).fold(f64::MIN, f64::max);
        tail[i] = tail[i + 1] + best;
    }
    struct Search<'a> {
        sets: &'a [Vec<(f64, Vec<f64>)>],
        tail: &'a [f64],
        budget: &'a [f64],
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, reward: f64, used: &mut Vec<f64>) {
            if i == self.sets.len() {
                self.best = self.best.max(reward);
                return;
            }
            if reward + self.tail[i] <= self.best {
                return;
            }
            for (f, b) in &self.sets[i] {
                let fits = used.iter().zip(b).zip(self.budget).all(|((u, x), cap)| u + x <= *cap);
                if !fits {
                    continue;
                }
                let saved = used.clone();
                for (u, x) in used.iter_mut().zip(b) {
                    *u += x;
                }
                self.go(i + 1, reward + f, used);
                *used = saved;
            }
        }
    }
    let mut s = Search {
        sets: &sets,
        tail: &tail,
        budget: resources.budget(),
        best: f64::NEG_INFINITY,
    };
    s.go(0, 0.0, &mut vec![0.0; resources.m()]);
    if s.best == f64::NEG_INFINITY {
        Err(EvalError::Infeasible)
    } else {
        Ok(s.best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualMinimum {
    pub mu: f64,
    pub value: f64,
}

/// Golden-section minimisation of `mu -> D(mu)` on `[0, f_bar / rho + 1]` for one resource.
pub fn opt_dual_min(
    requests: &[Request],
    resources: &ResourceSpec,
    bounds: &ProblemBounds,
) -> Result<DualMinimum, EvalError> {
    if resources.m() != 1 {
        return Err(EvalError::NotSingleResource(resources.m()));
    }
    let d = |mu: f64| dual_bound(requests, &[mu], resources);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, bounds.f_bar / resources.rho()[0] + 1.0);
    let mut best = DualMinimum { mu: a, value: d(a)? };
    let right = d(b)?;
    if right < best.value {
        best = DualMinimum { mu: b, value: right };
    }
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (d(x1)?, d(x2)?);
    for _ in 0..200 {
        if b - a <= 1e-9 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = d(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = d(x2)?;
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best.value {
                best = DualMinimum { mu: x, value: f };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitiveGap {
    pub alpha_star: f64,
    /// `OPT - alpha_star * reward`.
    pub gap: f64,
}

pub fn competitive_gap(
    requests: &[Request],
    traj: &Trajectory,
    resources: &ResourceSpec,
    opt: f64,
) -> CompetitiveGap {
    let alpha_star = crate::streams::alpha_star(requests, resources.rho());
    CompetitiveGap {
        alpha_star,
        gap: opt - alpha_star * traj.total_reward,
    }
}

/// One benchmark outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub experiment_id: String,
    pub algorithm: String,
    pub reference_fn: String,
    pub stream: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub m: usize,
    pub d: usize,
    pub model_seed: u64,
    pub trial_seed: u64,
    pub eta: f64,
    pub total_reward: f64,
    pub dual_bound: f64,
    pub opt_exact: Option<f64>,
    pub regret_estimate: f64,
    pub stopping_time: usize,
    pub runtime_ns: u64,
}

impl BenchmarkRecord {
    /// Regret against the exact optimum when known, the dual bound otherwise.
    pub fn regret(dual_bound: f64, opt_exact: Option<f64>, total_reward: f64) -> f64 {
        opt_exact.unwrap_or(dual_bound) - total_reward
    }
}

/// Dual bound at the run's average multipliers and the resulting regret estimate.
pub fn regret_estimate(
    requests: &[Request],
    traj: &Trajectory,
    resources: &ResourceSpec,
) -> Result<(f64, f64), SolveError> {
    let d = dual_bound(requests, &traj.mu_avg, resources)?;
    Ok((d, d - traj.total_reward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConsumptionMatrix, LinearRequest};
    use crate::streams::{StreamKind, StreamSpec};

    fn binary(f: f64, b: f64) -> Request {
        Request::Linear(LinearRequest {
            reward: vec![f],
            consumption: ConsumptionMatrix::new(1, 1, vec![b]).unwrap(),
            domain: LinearDomain::Binary,
        })
    }

    #[test]
    fn single_infeasible_request() {
        let reqs = [binary(1.0, 1.0)];
        let res = ResourceSpec::new(vec![0.5], 1).unwrap();
        assert_eq!(dual_bound(&reqs, &[2.0], &res).unwrap(), 1.0);
        assert_eq!(opt_exact_enumeration(&reqs, &res).unwrap(), 0.0);
    }

    #[test]
    fn zero_mu_sums_best_rewards() {
        let reqs = [binary(1.0, 1.0), binary(0.25, 3.0), binary(0.0, 0.1)];
        let res = ResourceSpec::new(vec![0.5], 3).unwrap();
        assert_eq!(dual_bound(&reqs, &[0.0], &res).unwrap(), 1.25);
    }

    #[test]
    fn lower_bound_instance_optimum() {
        let g = StreamSpec::new(StreamKind::AdversarialLb { t_hat: 2, branch: 1 }, 0, 0, 8)
            .generate()
            .unwrap();
        assert_eq!(opt_exact_enumeration(&g.requests, &g.resources).unwrap(), 5.0);
        let g2 = StreamSpec::new(StreamKind::AdversarialLb { t_hat: 2, branch: 2 }, 0, 0, 8)
            .generate()
            .unwrap();
        assert_eq!(opt_exact_enumeration(&g2.requests, &g2.resources).unwrap(), 6.0);
    }

    #[test]
    fn oversized_instance_is_rejected() {
        let reqs: Vec<Request> = (0..21).map(|_| binary(1.0, 0.1)).collect();
        let res = ResourceSpec::new(vec![0.5], 21).unwrap();
        assert!(matches!(opt_exact_enumeration(&reqs, &res), Err(EvalError::TooLarge(_))));
    }

    #[test]
    fn dual_min_with_free_requests_is_at_zero() {
        let reqs = [binary(1.0, 0.0), binary(2.0, 0.0)];
        let res = ResourceSpec::new(vec![0.5], 2).unwrap();
        let b = ProblemBounds::new(2.0, 1.0, &res);
        let r = opt_dual_min(&reqs, &res, &b).unwrap();
        assert!(r.mu < 1e-6);
        assert!((r.value - 3.0).abs() < 1e-6);
        let end = dual_bound(&reqs, &[b.f_bar / 0.5 + 1.0], &res).unwrap();
        assert!(end >= r.value);
    }
}
