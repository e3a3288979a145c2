use rand::Rng;

use super::{Headroom, PrimalSolution, SolveError};
use crate::model::{Action, AssortmentRequest};

/// `sum_{j in S} a_j w_j / (1 + sum_{j in S} w_j)` with `a = r - mu`, `w = exp(theta)`.
///
/// Terms are summed in increasing index order so equal sets give bit-equal values.
pub fn assortment_value(req: &AssortmentRequest, mu: &[f64], set: &[usize]) -> f64 {
    let mut s = set.to_vec();
    s.sort_unstable();
    let (mut num, mut den) = (0.0, 1.0);
    for j in s {
        let w = req.utility[j].exp();
        num += (req.revenue[j] - mu[j]) * w;
        den += w;
    }
    num / den
}

fn check(req: &AssortmentRequest, mu: &[f64]) -> Result<(), SolveError> {
    if req.revenue.len() != req.utility.len() {
        return Err(SolveError::Malformed("revenue and utility lengths differ"));
    }
    if req.revenue.len() != mu.len() {
        return Err(SolveError::Dimension {
            request: req.revenue.len(),
            mu: mu.len(),
        });
    }
    Ok(())
}

/// Products by decreasing `key`, lowest index first among equals.
fn ordered(cands: &[usize], key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut c = cands.to_vec();
    c.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));
    c
}

fn solve(req: &AssortmentRequest, mu: &[f64], allowed: impl Fn(usize) -> bool) -> PrimalSolution {
    let m = req.revenue.len();
    let a = |j: usize| req.revenue[j] - mu[j];
    let w: Vec<f64> = req.utility.iter().map(|t| t.exp()).collect();
    // A product with nonpositive adjusted revenue never raises the value.
    let positive: Vec<usize> = (0..m).filter(|&j| allowed(j) && a(j) > 0.0).collect();
    let cap = req.max_size.unwrap_or(m);

    let best: Vec<usize> = if cap >= positive.len() {
        // Revenue-ordered nested sets; strict improvement keeps the smaller set on ties.
        let order = ordered(&positive, a);
        let (mut best_k, mut best_v) = (0, 0.0);
        for k in 1..=order.len() {
            let v = assortment_value(req, mu, &order[..k]);
            if v > best_v {
                best_k = k;
                best_v = v;
            }
        }
        order[..best_k].to_vec()
    } else {
        // Parametric search: S(z) = top-`cap` terms of (a_j - z) w_j, z <- value(S(z)).
        let (mut best, mut z) = (Vec::new(), 0.0);
        loop {
            let keep: Vec<usize> = positive.iter().copied().filter(|&j| (a(j) - z) * w[j] > 0.0).collect();
            let mut cand = ordered(&keep, |j| (a(j) - z) * w[j]);
            cand.truncate(cap);
            let v = assortment_value(req, mu, &cand);
            if v > z {
                z = v;
                best = cand;
            } else {
                break;
            }
        }
        ordered(&best, a)
    };

    let den = 1.0 + best.iter().map(|&j| w[j]).sum::<f64>();
    let mut consumption = vec![0.0; m];
    let mut reward = 0.0;
    for &j in &best {
        consumption[j] = w[j] / den;
        reward += req.revenue[j] * consumption[j];
    }
    let conjugate = assortment_value(req, mu, &best);
    PrimalSolution {
        action: Action::Assortment(best),
        reward,
        consumption,
        conjugate,
    }
}

/// Best MNL assortment for adjusted revenues `r - mu`, respecting the size cap.
pub fn solve_assortment(req: &AssortmentRequest, mu: &[f64]) -> Result<PrimalSolution, SolveError> {
    check(req, mu)?;
    Ok(solve(req, mu, |_| true))
}

/// Best assortment among products with at least one unit of inventory left.
pub fn solve_assortment_within(
    req: &AssortmentRequest,
    mu: &[f64],
    room: Headroom<'_>,
) -> Result<PrimalSolution, SolveError> {
    check(req, mu)?;
    Ok(solve(req, mu, |j| room.fits(j, 1.0)))
}

/// Draw the customer's choice from `set`: `Some(j)` for a purchase, `None` for no purchase.
pub fn sample_assortment<R: Rng + ?Sized>(
    req: &AssortmentRequest,
    set: &[usize],
    rng: &mut R,
) -> Option<usize> {
    let w: Vec<f64> = set.iter().map(|&j| req.utility[j].exp()).collect();
    let den = 1.0 + w.iter().sum::<f64>();
    let u: f64 = rng.random::<f64>() * den;
    let mut acc = 0.0;
    for (&j, &wj) in set.iter().zip(&w) {
        acc += wj;
        if u < acc {
            return Some(j);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn req(revenue: Vec<f64>, utility: Vec<f64>, max_size: Option<usize>) -> AssortmentRequest {
        AssortmentRequest {
            revenue,
            utility,
            max_size,
        }
    }

    #[test]
    fn two_product_example() {
        let r = req(vec![3.0, 1.0], vec![0.0, 0.0], None);
        let mu = [0.0, 0.0];
        assert_eq!(assortment_value(&r, &mu, &[0]), 1.5);
        assert!((assortment_value(&r, &mu, &[0, 1]) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(assortment_value(&r, &mu, &[1]), 0.5);
        let sol = solve_assortment(&r, &mu).unwrap();
        assert_eq!(sol.action, Action::Assortment(vec![0]));
        assert_eq!(sol.reward, 1.5);
    }

    #[test]
    fn high_prices_give_empty_set() {
        let r = req(vec![3.0, 1.0], vec![0.5, -0.2], None);
        let sol = solve_assortment(&r, &[3.0, 7.0]).unwrap();
        assert_eq!(sol.action, Action::Assortment(vec![]));
        assert_eq!(sol.conjugate, 0.0);
    }

    #[test]
    fn cap_is_respected() {
        let r = req(vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0], Some(2));
        let sol = solve_assortment(&r, &[0.0; 3]).unwrap();
        let Action::Assortment(s) = sol.action else { panic!() };
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn empty_assortment_never_sells() {
        let r = req(vec![1.0], vec![0.0], None);
        let mut rng = seed::rng(1);
        for _ in 0..100 {
            assert_eq!(sample_assortment(&r, &[], &mut rng), None);
        }
    }

    #[test]
    fn purchase_probability_grows_with_utility() {
        let mut last = 0.0;
        for theta in [0.0, 2.0, 5.0, 10.0] {
            let r = req(vec![1.0], vec![theta], None);
            let sol = solve_assortment(&r, &[0.0]).unwrap();
            assert!(sol.consumption[0] > last);
            last = sol.consumption[0];
        }
        assert!(last > 0.9999);
    }

    #[test]
    fn sampling_frequencies_match_choice_probabilities() {
        let r = req(vec![1.0, 2.0], vec![0.3, -0.4], None);
        let set = [0usize, 1];
        let w: Vec<f64> = r.utility.iter().map(|t: &f64| t.exp()).collect();
        let den = 1.0 + w[0] + w[1];
        let p = [w[0] / den, w[1] / den, 1.0 / den];
        let mut rng = seed::rng(5);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            match sample_assortment(&r, &set, &mut rng) {
                Some(j) => counts[j] += 1,
                None => counts[2] += 1,
            }
        }
        for (c, p) in counts.iter().zip(p) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se);
        }
    }
}
