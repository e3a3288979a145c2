use online_alloc::mirror::{bregman, mirror_step, strong_convexity, DualVector, ReferenceFunction};
use online_alloc::model::{ProblemBounds, ResourceSpec};
use proptest::prelude::*;

/// Golden-section minimiser of a convex function on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The boundary can win for the clipped quadratic.
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

/// Coordinate `j` of `argmin_y (g_j + nu) y + V_j(y, mu_j) / eta`, found numerically.
fn coord_min(h: &ReferenceFunction, j: usize, mu: f64, g: f64, nu: f64, eta: f64) -> f64 {
    let v = |y: f64| {
        let mut a = vec![0.0; j + 1];
        let mut b = vec![1.0; j + 1];
        a[j] = y;
        b[j] = mu;
        bregman(h, &a, &b).unwrap()
    };
    let obj = |y: f64| (g + nu) * y + v(y) / eta;
    let w2 = match h {
        ReferenceFunction::SquaredL2 { weights: Some(w) } => w[j] * w[j],
        _ => 1.0,
    };
    let hi = if h.is_entropy() {
        mu * (eta * g.abs()).exp() * 2.0 + 1.0
    } else {
        mu + eta * g.abs() / w2 + 1.0
    };
    golden(obj, 0.0, hi)
}

fn numeric_step(h: &ReferenceFunction, mu: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> {
        (0..mu.len())
            .map(|j| coord_min(h, j, mu[j], g[j], nu, eta))
            .collect()
    };
    match h {
        ReferenceFunction::NegEntropyProjected { f_bar } => {
            let free = at(0.0);
            if free.iter().sum::<f64>() <= *f_bar {
                return free;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while at(hi).iter().sum::<f64>() > *f_bar {
                hi *= 2.0;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if at(mid).iter().sum::<f64>() > *f_bar {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at(hi)
        }
        _ => at(0.0),
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..5).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01f64..3.0, m),
            prop::collection::vec(-4.0f64..4.0, m),
            prop::collection::vec(0.3f64..2.0, m),
            0.01f64..1.0,
        )
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn l2_step_minimises_objective((mu, g, _w, eta) in instance()) {
        let h = ReferenceFunction::ogd();
        let got = mirror_step(&h, &DualVector::new(mu.clone()).unwrap(), &g, eta).unwrap();
        let want = numeric_step(&h, &mu, &g, eta);
        prop_assert!(close(got.as_slice(), &want, 1e-6), "{:?} vs {:?}", got, want);
    }

    #[test]
    fn weighted_l2_step_minimises_objective((mu, g, w, eta) in instance()) {
        let h = ReferenceFunction::SquaredL2 { weights: Some(w) };
        let got = mirror_step(&h, &DualVector::new(mu.clone()).unwrap(), &g, eta).unwrap();
        let want = numeric_step(&h, &mu, &g, eta);
        prop_assert!(close(got.as_slice(), &want, 1e-6), "{:?} vs {:?}", got, want);
    }

    #[test]
    fn entropy_step_minimises_objective((mu, g, _w, eta) in instance()) {
        let h = ReferenceFunction::NegEntropy;
        let got = mirror_step(&h, &DualVector::new(mu.clone()).unwrap(), &g, eta).unwrap();
        let want = numeric_step(&h, &mu, &g, eta);
        prop_assert!(close(got.as_slice(), &want, 1e-6), "{:?} vs {:?}", got, want);
    }

    #[test]
    fn projected_step_minimises_objective((mu, g, _w, eta) in instance(), f_bar in 0.5f64..6.0) {
        let total: f64 = mu.iter().sum();
        let mu: Vec<f64> = if total > f_bar { mu.iter().map(|x| x * f_bar / total).collect() } else { mu };
        let h = ReferenceFunction::NegEntropyProjected { f_bar };
        let got = mirror_step(&h, &DualVector::new(mu.clone()).unwrap(), &g, eta).unwrap();
        let want = numeric_step(&h, &mu, &g, eta);
        prop_assert!(close(got.as_slice(), &want, 1e-6), "{:?} vs {:?}", got, want);
        prop_assert!(got.as_slice().iter().sum::<f64>() <= f_bar * (1.0 + 1e-12));
        prop_assert!(got.as_slice().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn l2_strong_convexity(x in prop::collection::vec(0.0f64..10.0, 1..6), shift in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = x.len();
        let y: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| (a + s).max(0.0)).collect();
        let res = ResourceSpec::new(vec![0.5; m], 10).unwrap();
        let b = ProblemBounds::new(1.0, 1.0, &res);
        let h = ReferenceFunction::ogd();
        let sigma = strong_convexity(&h, m, &b).sigma;
        let l1: f64 = x.iter().zip(&y).map(|(a, c)| (a - c).abs()).sum();
        prop_assert!(bregman(&h, &x, &y).unwrap() >= 0.5 * sigma * l1 * l1 * (1.0 - 1e-12) - 1e-12);
    }

    #[test]
    fn entropy_strong_convexity_on_box(
        u in prop::collection::vec(0.0f64..1.0, 1..6),
        v in prop::collection::vec(1e-6f64..1.0, 6),
        f_bar in 0.5f64..5.0,
        rho in 0.1f64..0.9,
    ) {
        let m = u.len();
        let res = ResourceSpec::new(vec![rho; m], 10).unwrap();
        let b = ProblemBounds::new(f_bar, 1.0, &res);
        let top = f_bar / rho + 1.0;
        let x: Vec<f64> = u.iter().map(|a| a * top).collect();
        let y: Vec<f64> = v[..m].iter().map(|a| a * top).collect();
        let h = ReferenceFunction::NegEntropy;
        let sigma = strong_convexity(&h, m, &b).sigma;
        let l1: f64 = x.iter().zip(&y).map(|(a, c)| (a - c).abs()).sum();
        prop_assert!(bregman(&h, &x, &y).unwrap() >= 0.5 * sigma * l1 * l1 * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn projected_strong_convexity_on_simplex(
        u in prop::collection::vec(0.0f64..1.0, 2..6),
        v in prop::collection::vec(1e-3f64..1.0, 6),
        f_bar in 0.5f64..5.0,
    ) {
        let m = u.len();
        let scale = |w: &[f64]| -> Vec<f64> {
            let s: f64 = w.iter().sum::<f64>().max(1.0);
            w.iter().map(|a| a * f_bar / s).collect()
        };
        let x = scale(&u);
        let y = scale(&v[..m]);
        let h = ReferenceFunction::NegEntropyProjected { f_bar };
        let res = ResourceSpec::new(vec![0.5; m], 10).unwrap();
        let b = ProblemBounds::new(f_bar, 1.0, &res);
        let sigma = strong_convexity(&h, m, &b).sigma;
        let l1: f64 = x.iter().zip(&y).map(|(a, c)| (a - c).abs()).sum();
        prop_assert!(bregman(&h, &x, &y).unwrap() >= 0.5 * sigma * l1 * l1 * (1.0 - 1e-9) - 1e-12);
    }
}

#[test]
fn entropy_step_matches_numeric_minimiser_tightly() {
    let h = ReferenceFunction::NegEntropy;
    let mu = [0.5, 0.5];
    let g = [0.2, -0.3];
    let got = mirror_step(&h, &DualVector::new(mu.to_vec()).unwrap(), &g, 0.1).unwrap();
    let want = numeric_step(&h, &mu, &g, 0.1);
    assert!(close(got.as_slice(), &want, 1e-8));
}
