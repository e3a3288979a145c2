//! Per-request solvers for `argmax_x f(x) - mu.b(x)`.
//!
//! Each solver returns the maximiser together with its reward, its expected
//! consumption and the conjugate value `f*(mu) = f(x~) - mu.b(x~)`. The
//! `*_within` variants restrict the maximisation to actions whose worst-case
//! consumption fits in the remaining budget.

mod assortment;
mod auction;
mod linear;
mod matching;

pub use assortment::{assortment_value, sample_assortment, solve_assortment, solve_assortment_within};
pub use auction::{solve_auction, solve_auction_within};
pub use linear::{solve_linear, solve_linear_within};
pub use matching::{matching_entropy, sample_matching, solve_matching, solve_matching_within};

use serde::{Deserialize, Serialize};

use crate::model::{Action, Request};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("dimension mismatch: request has {request} resources, mu has {mu}")]
    Dimension { request: usize, mu: usize },
    #[error("malformed request: {0}")]
    Malformed(&'static str),
    #[error("assignment probabilities sum to {0} > 1")]
    ProbabilityMass(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub action: Action,
    pub reward: f64,
    pub consumption: Vec<f64>,
    pub conjugate: f64,
}

impl PrimalSolution {
    pub(crate) fn void(m: usize) -> Self {
        Self {
            action: Action::Void,
            reward: 0.0,
            consumption: vec![0.0; m],
            conjugate: 0.0,
        }
    }
}

/// Remaining room per resource, tested as `consumed + amount <= budget`.
#[derive(Debug, Clone, Copy)]
pub struct Headroom<'a> {
    pub consumed: &'a [f64],
    pub budget: &'a [f64],
}

impl Headroom<'_> {
    pub fn fits(&self, i: usize, amount: f64) -> bool {
        self.consumed[i] + amount <= self.budget[i]
    }

    pub fn fits_all(&self, amounts: &[f64]) -> bool {
        amounts.iter().enumerate().all(|(i, &a)| self.fits(i, a))
    }
}

fn check_dims(req: &Request, mu: &[f64]) -> Result<(), SolveError> {
    let m = req.resources();
    if m != mu.len() {
        return Err(SolveError::Dimension {
            request: m,
            mu: mu.len(),
        });
    }
    Ok(())
}

/// Unconstrained maximiser for any request.
pub fn solve(req: &Request, mu: &[f64]) -> Result<PrimalSolution, SolveError> {
    check_dims(req, mu)?;
    match req {
        Request::Linear(r) => solve_linear(r, mu),
        Request::Auction(r) => solve_auction(r, mu),
        Request::Matching(r) => solve_matching(r, mu),
        Request::Assortment(r) => solve_assortment(r, mu),
    }
}

/// Maximiser over actions whose worst-case consumption fits in `room`.
pub fn solve_within(
    req: &Request,
    mu: &[f64],
    room: Headroom<'_>,
) -> Result<PrimalSolution, SolveError> {
    check_dims(req, mu)?;
    match req {
        Request::Linear(r) => solve_linear_within(r, mu, room),
        Request::Auction(r) => solve_auction_within(r, mu, room),
        Request::Matching(r) => solve_matching_within(r, mu, room),
        Request::Assortment(r) => solve_assortment_within(r, mu, room),
    }
}

/// `f*(mu)` for one request.
pub fn conjugate(req: &Request, mu: &[f64]) -> Result<f64, SolveError> {
    check_dims(req, mu)?;
    Ok(match req {
        Request::Linear(r) => linear::conjugate(r, mu),
        Request::Auction(r) => auction::conjugate(r, mu[0]),
        Request::Matching(r) => matching::conjugate(r, mu),
        Request::Assortment(r) => solve_assortment(r, mu)?.conjugate,
    })
}

/// Componentwise maximum consumption over the random outcomes of `sol`.
///
/// Deterministic applications consume exactly `sol.consumption`; matching and
/// assortment can consume one unit of any resource in the support.
pub fn worst_case_consumption(req: &Request, sol: &PrimalSolution) -> Vec<f64> {
    match (&sol.action, req) {
        (Action::Matching(x), _) => x.iter().map(|&p| if p > 0.0 { 1.0 } else { 0.0 }).collect(),
        (Action::Assortment(s), Request::Assortment(r)) => {
            let mut w = vec![0.0; r.revenue.len()];
            for &j in s {
                w[j] = 1.0;
            }
            w
        }
        _ => sol.consumption.clone(),
    }
}
