use super::{Headroom, PrimalSolution, SolveError};
use crate::model::{Action, LinearDomain, LinearRequest};

fn scores(req: &LinearRequest, mu: &[f64]) -> Vec<f64> {
    let c = &req.consumption;
    let mut s = req.reward.clone();
    for (i, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let row = &c.data()[i * c.cols()..(i + 1) * c.cols()];
        for (sj, &cij) in s.iter_mut().zip(row) {
            *sj -= m * cij;
        }
    }
    s
}

fn shape_ok(req: &LinearRequest) -> Result<(), SolveError> {
    if req.reward.len() != req.consumption.cols() || req.reward.is_empty() {
        return Err(SolveError::Malformed("reward length differs from matrix columns"));
    }
    if req.domain == LinearDomain::Binary && req.reward.len() != 1 {
        return Err(SolveError::Malformed("binary domain needs one column"));
    }
    Ok(())
}

/// Index of the best admissible column, lowest index on ties.
fn pick(domain: LinearDomain, s: &[f64], admissible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &sj) in s.iter().enumerate() {
        if admissible(j) && best.is_none_or(|b| sj > s[b]) {
            best = Some(j);
        }
    }
    match domain {
        LinearDomain::EqualitySimplex => best,
        LinearDomain::SubSimplex | LinearDomain::Binary => best.filter(|&j| s[j] > 0.0),
    }
}

fn build(req: &LinearRequest, s: &[f64], choice: Option<usize>) -> PrimalSolution {
    match choice {
        None => PrimalSolution::void(req.consumption.rows()),
        Some(j) => PrimalSolution {
            action: Action::Select(j),
            reward: req.reward[j],
            consumption: req.consumption.column(j),
            conjugate: s[j],
        },
    }
}

pub fn solve_linear(req: &LinearRequest, mu: &[f64]) -> Result<PrimalSolution, SolveError> {
    shape_ok(req)?;
    let s = scores(req, mu);
    Ok(build(req, &s, pick(req.domain, &s, |_| true)))
}

/// Restricts the choice to columns that fit; the zero action is the fallback.
pub fn solve_linear_within(
    req: &LinearRequest,
    mu: &[f64],
    room: Headroom<'_>,
) -> Result<PrimalSolution, SolveError> {
    shape_ok(req)?;
    let s = scores(req, mu);
    let c = &req.consumption;
    let fits = |j: usize| (0..c.rows()).all(|i| room.fits(i, c.get(i, j)));
    Ok(build(req, &s, pick(req.domain, &s, fits)))
}

pub(super) fn conjugate(req: &LinearRequest, mu: &[f64]) -> f64 {
    let s = scores(req, mu);
    match pick(req.domain, &s, |_| true) {
        Some(j) => s[j],
        None => 0.0,
    }
}
