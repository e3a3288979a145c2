use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 when `n = 1`.
    pub std: f64,
    /// Half-width `1.96 std / sqrt(n)`.
    pub ci95: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Summary, EvalError> {
    let n = values.len();
    if n == 0 {
        return Err(EvalError::EmptyGroup);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let std = if n > 1 {
        let ss = sorted
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<CompensatedSum>()
            .value();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        mean,
        std,
        ci95: 1.96 * std / (n as f64).sqrt(),
        n,
    })
}

/// Group `items` by `key` and summarise `value` within each group.
pub fn aggregate_by<T, K: Ord>(
    items: &[T],
    key: impl Fn(&T) -> K,
    value: impl Fn(&T) -> f64,
) -> Result<BTreeMap<K, Summary>, EvalError> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for it in items {
        groups.entry(key(it)).or_default().push(value(it));
    }
    groups
        .into_iter()
        .map(|(k, v)| aggregate(&v).map(|s| (k, s)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// Points dropped for having a nonpositive value.
    pub excluded: usize,
}

/// Least-squares line through `(ln T, ln regret)`.
pub fn fit_growth(points: &[(f64, f64)]) -> Result<GrowthFit, EvalError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(EvalError::TooFewPoints {
            needed: 3,
            got: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(GrowthFit {
        slope,
        intercept: my - slope * mx,
        excluded,
    })
}
