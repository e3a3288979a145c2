//! Reference functions and the mirror-descent step on the dual.
//!
//! All three built-ins are separable, so the step has a closed form:
//!
//! | reference          | `h(mu)`                 | step                              |
//! |--------------------|-------------------------|-----------------------------------|
//! | `SquaredL2 { w }`  | `1/2 sum (w_j mu_j)^2`  | `max(0, mu_j - eta g_j / w_j^2)`  |
//! | `NegEntropy`       | `sum mu_j ln mu_j`      | `mu_j exp(-eta g_j)`              |
//! | `NegEntropyProjected { f_bar }` | same, on `{mu >= 0, sum mu <= f_bar}` | entropy step, then rescale onto the face if the sum exceeds `f_bar` |
//!
//! The projected variant assumes unit per-period endowments; the allocator
//! rescales resources before handing subgradients to it.

use serde::{Deserialize, Serialize};

use crate::model::ProblemBounds;

/// Exponents of the multiplicative step are clamped to this range.
pub const EXP_CLAMP: f64 = 700.0;
/// Entropy iterates never drop below this value.
pub const MU_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MirrorError {
    #[error("step size must be positive and finite, got {0}")]
    BadStepSize(f64),
    #[error("subgradient component {0} is NaN")]
    NanSubgradient(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("component {index} = {value} is outside the domain of the reference function")]
    Domain { index: usize, value: f64 },
    #[error("invalid reference function: {0}")]
    BadReference(&'static str),
    #[error("C2 must be positive to choose a step size")]
    ZeroC2,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceFunction {
    SquaredL2 { weights: Option<Vec<f64>> },
    NegEntropy,
    NegEntropyProjected { f_bar: f64 },
}

impl ReferenceFunction {
    pub fn ogd() -> Self {
        ReferenceFunction::SquaredL2 { weights: None }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ReferenceFunction::SquaredL2 { weights: None } => "l2",
            ReferenceFunction::SquaredL2 { weights: Some(_) } => "weighted_l2",
            ReferenceFunction::NegEntropy => "entropy",
            ReferenceFunction::NegEntropyProjected { .. } => "entropy_projected",
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), MirrorError> {
        match self {
            ReferenceFunction::SquaredL2 { weights: Some(w) } => {
                if w.len() != m {
                    return Err(MirrorError::Dimension(w.len(), m));
                }
                if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(MirrorError::BadReference("weights must be positive"));
                }
                Ok(())
            }
            ReferenceFunction::NegEntropyProjected { f_bar } if !(*f_bar > 0.0) => {
                Err(MirrorError::BadReference("f_bar must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_entropy(&self) -> bool {
        !matches!(self, ReferenceFunction::SquaredL2 { .. })
    }

    fn weight(&self, j: usize) -> f64 {
        match self {
            ReferenceFunction::SquaredL2 { weights: Some(w) } => w[j],
            _ => 1.0,
        }
    }

    /// `h(mu)`.
    pub fn value(&self, mu: &[f64]) -> f64 {
        match self {
            ReferenceFunction::SquaredL2 { .. } => mu
                .iter()
                .enumerate()
                .map(|(j, &x)| 0.5 * (self.weight(j) * x).powi(2))
                .sum(),
            _ => mu.iter().map(|&x| xlogx(x)).sum(),
        }
    }

    /// `d h / d mu_j` at `mu_j`.
    pub fn gradient(&self, j: usize, mu_j: f64) -> f64 {
        match self {
            ReferenceFunction::SquaredL2 { .. } => self.weight(j).powi(2) * mu_j,
            _ => 1.0 + mu_j.ln(),
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Nonnegative multiplier vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(mu: Vec<f64>) -> Result<Self, MirrorError> {
        for (index, &value) in mu.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MirrorError::Domain { index, value });
            }
        }
        Ok(Self(mu))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for DualVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `argmin_{mu'} g.mu' + V_h(mu', mu) / eta` over the domain of `h`.
pub fn mirror_step(
    h: &ReferenceFunction,
    mu: &DualVector,
    g: &[f64],
    eta: f64,
) -> Result<DualVector, MirrorError> {
    let mut out = mu.clone();
    mirror_step_in_place(h, &mut out.0, g, eta)?;
    Ok(out)
}

/// In-place form of [`mirror_step`], used by the allocator's hot loop.
pub fn mirror_step_in_place(
    h: &ReferenceFunction,
    mu: &mut [f64],
    g: &[f64],
    eta: f64,
) -> Result<(), MirrorError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(MirrorError::BadStepSize(eta));
    }
    if mu.len() != g.len() {
        return Err(MirrorError::Dimension(mu.len(), g.len()));
    }
    if let Some(j) = g.iter().position(|x| x.is_nan()) {
        return Err(MirrorError::NanSubgradient(j));
    }
    match h {
        ReferenceFunction::SquaredL2 { weights } => match weights {
            None => {
                for (m, &gj) in mu.iter_mut().zip(g) {
                    *m = (*m - eta * gj).max(0.0);
                }
            }
            Some(w) => {
                for ((m, &gj), &wj) in mu.iter_mut().zip(g).zip(w) {
                    *m = (*m - eta * gj / (wj * wj)).max(0.0);
                }
            }
        },
        ReferenceFunction::NegEntropy => entropy_step(mu, g, eta),
        ReferenceFunction::NegEntropyProjected { f_bar } => {
            entropy_step(mu, g, eta);
            let total: f64 = mu.iter().sum();
            if total > *f_bar {
                let scale = f_bar / total;
                for m in mu.iter_mut() {
                    *m = (*m * scale).max(MU_FLOOR);
                }
            }
        }
    }
    Ok(())
}

fn entropy_step(mu: &mut [f64], g: &[f64], eta: f64) {
    for (m, &gj) in mu.iter_mut().zip(g) {
        let e = (-eta * gj).clamp(-EXP_CLAMP, EXP_CLAMP);
        *m = (*m * e.exp()).max(MU_FLOOR);
    }
}

/// `V_h(x, y) = h(x) - h(y) - grad h(y).(x - y)`.
///
/// Under the entropies `x` may have zero components but `y` must be positive.
pub fn bregman(h: &ReferenceFunction, x: &[f64], y: &[f64]) -> Result<f64, MirrorError> {
    if x.len() != y.len() {
        return Err(MirrorError::Dimension(x.len(), y.len()));
    }
    match h {
        ReferenceFunction::SquaredL2 { .. } => Ok(x
            .iter()
            .zip(y)
            .enumerate()
            .map(|(j, (a, b))| 0.5 * (h.weight(j) * (a - b)).powi(2))
            .sum()),
        _ => {
            let mut v = 0.0;
            for (j, (&a, &b)) in x.iter().zip(y).enumerate() {
                if !(a >= 0.0) {
                    return Err(MirrorError::Domain { index: j, value: a });
                }
                if !(b > 0.0) {
                    return Err(MirrorError::Domain { index: j, value: b });
                }
                v += xlogx(a) - a * b.ln() - a + b;
            }
            Ok(v.max(0.0))
        }
    }
}

/// Standard starting point for each reference function.
pub fn default_initial(h: &ReferenceFunction, m: usize) -> DualVector {
    match h {
        ReferenceFunction::SquaredL2 { .. } => DualVector::zeros(m),
        ReferenceFunction::NegEntropy => DualVector(vec![1.0 / m as f64; m]),
        ReferenceFunction::NegEntropyProjected { f_bar } => DualVector(vec![f_bar / m as f64; m]),
    }
}

/// Upper envelope `f_bar / rho_j + 1` that iterates stay below for small steps.
pub fn mu_max(bounds: &ProblemBounds, rho: &[f64]) -> Vec<f64> {
    rho.iter().map(|r| bounds.f_bar / r + 1.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongConvexity {
    pub sigma: f64,
    pub norm: &'static str,
}

/// Strong-convexity modulus with respect to the l1 norm.
///
/// The plain entropy is only strongly convex on a bounded box; the box
/// `[0, f_bar / rho_lower + 1]^m` is used.
pub fn strong_convexity(h: &ReferenceFunction, m: usize, bounds: &ProblemBounds) -> StrongConvexity {
    let m = m as f64;
    match h {
        ReferenceFunction::SquaredL2 { weights } => {
            let w2 = weights
                .as_ref()
                .map(|w| w.iter().map(|x| x * x).fold(f64::INFINITY, f64::min))
                .unwrap_or(1.0);
            StrongConvexity {
                sigma: w2 / m,
                norm: "l1",
            }
        }
        ReferenceFunction::NegEntropy => StrongConvexity {
            sigma: 1.0 / (m * (bounds.f_bar / bounds.rho_lower + 1.0)),
            norm: "l1 on the box [0, f_bar/rho_lower + 1]^m",
        },
        ReferenceFunction::NegEntropyProjected { f_bar } => StrongConvexity {
            sigma: 1.0 / f_bar,
            norm: "l1 on the scaled simplex",
        },
    }
}

/// Per-coordinate strong-convexity modulus of the separable pieces `h_j`.
pub fn sigma2(h: &ReferenceFunction, bounds: &ProblemBounds) -> f64 {
    match h {
        ReferenceFunction::SquaredL2 { weights } => weights
            .as_ref()
            .map(|w| w.iter().map(|x| x * x).fold(f64::INFINITY, f64::min))
            .unwrap_or(1.0),
        _ => 1.0 / (bounds.f_bar / bounds.rho_lower + 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl TheoremConstants {
    /// `C1 + C2 eta T + C3 / eta`.
    pub fn bound(&self, eta: f64, horizon: usize) -> f64 {
        self.c1 + self.c2 * eta * horizon as f64 + self.c3 / eta
    }
}

/// Pivot duals `{0, (f_bar / rho_j) e_j}`.
pub fn pivots(bounds: &ProblemBounds, rho: &[f64]) -> Vec<Vec<f64>> {
    let m = rho.len();
    let mut out = vec![vec![0.0; m]];
    for (j, r) in rho.iter().enumerate() {
        let mut p = vec![0.0; m];
        p[j] = bounds.f_bar / r;
        out.push(p);
    }
    out
}

/// Regret constants for stochastic input.
pub fn theorem_constants(
    h: &ReferenceFunction,
    bounds: &ProblemBounds,
    rho: &[f64],
    mu1: &DualVector,
) -> Result<TheoremConstants, MirrorError> {
    let sigma = strong_convexity(h, rho.len(), bounds).sigma;
    let mut c3 = 0.0_f64;
    for p in pivots(bounds, rho) {
        c3 = c3.max(bregman(h, &p, mu1.as_slice())?);
    }
    Ok(TheoremConstants {
        c1: bounds.f_bar * bounds.b_bar / bounds.rho_lower,
        c2: (bounds.b_bar + bounds.rho_bar).powi(2) / (2.0 * sigma),
        c3,
    })
}

/// Constants of the competitive-ratio bound `OPT - alpha R <= C1 + C2 eta T + C3 / eta`.
pub fn adversarial_constants(
    h: &ReferenceFunction,
    bounds: &ProblemBounds,
    rho: &[f64],
    mu1: &DualVector,
    alpha: f64,
) -> Result<TheoremConstants, MirrorError> {
    let sigma = strong_convexity(h, rho.len(), bounds).sigma;
    let mut c3 = 0.0_f64;
    for p in pivots(bounds, rho) {
        let scaled: Vec<f64> = p.iter().map(|x| x / alpha).collect();
        c3 = c3.max(alpha * bregman(h, &scaled, mu1.as_slice())?);
    }
    Ok(TheoremConstants {
        c1: bounds.f_bar * bounds.b_bar / bounds.rho_lower,
        c2: alpha * (bounds.b_bar + bounds.rho_bar).powi(2) / (2.0 * sigma),
        c3,
    })
}

/// Minimiser of `C2 eta T + C3 / eta`.
pub fn optimal_stepsize(c: &TheoremConstants, horizon: usize) -> Result<f64, MirrorError> {
    if horizon == 0 {
        return Err(MirrorError::EmptyHorizon);
    }
    if !(c.c2 > 0.0) {
        return Err(MirrorError::ZeroC2);
    }
    Ok((c.c3 / (c.c2 * horizon as f64)).sqrt())
}
