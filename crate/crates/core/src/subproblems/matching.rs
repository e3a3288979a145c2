use rand::Rng;

use super::{Headroom, PrimalSolution, SolveError};
use crate::model::{Action, MatchingRequest};

/// Tolerance on the assignment mass accepted by [`sample_matching`].
const MASS_TOL: f64 = 1e-12;

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Entropy of the `m + 1` outcome distribution `(x, 1 - sum x)`, natural log.
pub fn matching_entropy(x: &[f64]) -> f64 {
    let rest = (1.0 - x.iter().sum::<f64>()).max(0.0);
    -(x.iter().map(|&p| xlogx(p)).sum::<f64>() + xlogx(rest))
}

fn solve(req: &MatchingRequest, mu: &[f64], allowed: impl Fn(usize) -> bool) -> PrimalSolution {
    let m = req.reward.len();
    let lambda = req.lambda;
    let a: Vec<Option<f64>> = (0..m)
        .map(|j| allowed(j).then(|| (req.reward[j] - mu[j]) / lambda))
        .collect();
    let shift = a.iter().flatten().copied().fold(0.0_f64, f64::max);
    let e: Vec<f64> = a.iter().map(|aj| aj.map_or(0.0, |v| (v - shift).exp())).collect();
    let e0 = (-shift).exp();
    let z = e0 + e.iter().sum::<f64>();
    let x: Vec<f64> = e.iter().map(|v| v / z).collect();
    let x0 = e0 / z;
    let entropy = -(x.iter().map(|&p| xlogx(p)).sum::<f64>() + xlogx(x0));
    let reward = req.reward.iter().zip(&x).map(|(r, p)| r * p).sum::<f64>() + lambda * entropy;
    let conjugate = lambda * (shift + z.ln());
    PrimalSolution {
        action: Action::Matching(x.clone()),
        reward,
        consumption: x,
        conjugate,
    }
}

/// Softmax assignment `x_j = exp(a_j) / (1 + sum_l exp(a_l))`, `a = (r - mu) / lambda`.
pub fn solve_matching(req: &MatchingRequest, mu: &[f64]) -> Result<PrimalSolution, SolveError> {
    check(req, mu)?;
    Ok(solve(req, mu, |_| true))
}

/// Softmax over the advertisers that can still absorb a full unit.
pub fn solve_matching_within(
    req: &MatchingRequest,
    mu: &[f64],
    room: Headroom<'_>,
) -> Result<PrimalSolution, SolveError> {
    check(req, mu)?;
    Ok(solve(req, mu, |j| room.fits(j, 1.0)))
}

fn check(req: &MatchingRequest, mu: &[f64]) -> Result<(), SolveError> {
    if !(req.lambda > 0.0) {
        return Err(SolveError::Malformed("lambda must be positive"));
    }
    if req.reward.len() != mu.len() {
        return Err(SolveError::Dimension {
            request: req.reward.len(),
            mu: mu.len(),
        });
    }
    Ok(())
}

pub(super) fn conjugate(req: &MatchingRequest, mu: &[f64]) -> f64 {
    let a: Vec<f64> = req
        .reward
        .iter()
        .zip(mu)
        .map(|(r, m)| (r - m) / req.lambda)
        .collect();
    req.lambda * crate::numeric::log1p_sum_exp(&a)
}

/// Draw the realized assignment: `Some(j)` with probability `x_j`, `None` otherwise.
pub fn sample_matching<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<Option<usize>, SolveError> {
    let mass: f64 = x.iter().sum();
    if mass > 1.0 + MASS_TOL {
        return Err(SolveError::ProbabilityMass(mass));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in x.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            return Ok(Some(j));
        }
    }
    Ok(None)
}
