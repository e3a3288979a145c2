mod common;

use common::*;
use online_alloc::allocator::{
    check_feasibility, check_iterate_stability, check_omd_regret, check_stopping_time,
    check_stopping_time_bound, recompute_stopping_time, Allocator, Fault, StoppingBoundOutcome,
};
use online_alloc::mirror::ReferenceFunction;
use online_alloc::model::{LinearDomain, ProblemBounds, ResourceSpec};
use online_alloc::seed;
use online_alloc::streams::{StreamKind, StreamSpec};
use online_alloc::{
    run, AllocatorConfig, AllocatorError, ConsumptionMode, FeasibilityMode, InitialDual, StepSize,
};

fn one_resource(rho: f64, horizon: usize) -> (ResourceSpec, ProblemBounds) {
    let r = ResourceSpec::new(vec![rho], horizon).unwrap();
    let b = ProblemBounds::new(1.0, 1.0, &r);
    (r, b)
}

#[test]
fn blocked_request_is_voided_with_ungated_subgradient() {
    let (res, bounds) = one_resource(0.4, 1);
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(0.1));
    let mut a = Allocator::new(cfg, &res, &bounds).unwrap();
    let out = a.step(&binary(1.0, 1.0), &mut seed::rng(0)).unwrap();
    assert!(out.voided);
    assert_eq!(out.realized_reward, 0.0);
    assert_eq!(out.realized_consumption, vec![0.0]);
    assert!((out.subgradient[0] - (0.4 - 1.0)).abs() < 1e-15);
}

#[test]
fn zero_prices_take_the_reward_maximiser() {
    let res = ResourceSpec::new(vec![1.0, 1.0], 4).unwrap();
    let bounds = ProblemBounds::new(3.0, 1.0, &res);
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(0.1));
    let mut a = Allocator::new(cfg, &res, &bounds).unwrap();
    let req = linear(vec![1.0, 3.0], 2, vec![1.0, 0.0, 0.0, 1.0], LinearDomain::SubSimplex);
    let out = a.step(&req, &mut seed::rng(0)).unwrap();
    assert_eq!(out.expected_reward, 3.0);
    assert_eq!(out.subgradient, vec![1.0, 0.0]);
}

#[test]
fn over_consumption_raises_the_price() {
    let (res, bounds) = one_resource(0.5, 10);
    let eta = 0.2;
    let mut cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(eta));
    cfg.initial = InitialDual::Explicit(vec![0.3]);
    let mut a = Allocator::new(cfg, &res, &bounds).unwrap();
    a.step(&binary(1.0, 1.0), &mut seed::rng(0)).unwrap();
    assert!((a.mu()[0] - (0.3 + 0.5 * eta)).abs() < 1e-15);
}

#[test]
fn single_unaffordable_request_earns_nothing() {
    let (res, bounds) = one_resource(0.5, 1);
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(1.0));
    let traj = run(&[binary(1.0, 1.0)], &cfg, &res, &bounds, &mut seed::rng(0)).unwrap();
    assert_eq!(traj.total_reward, 0.0);
    assert_eq!(traj.voided, 1);
}

#[test]
fn ample_endowment_commits_first_request() {
    let res = ResourceSpec::new(vec![1.0, 2.0], 1).unwrap();
    let bounds = ProblemBounds::new(5.0, 1.0, &res);
    let req = linear(vec![4.0, 2.5], 2, vec![1.0, 0.5, 0.2, 1.0], LinearDomain::SubSimplex);
    let cfg = AllocatorConfig::new(ReferenceFunction::NegEntropy, StepSize::Fixed(0.01));
    let traj = run(&[req], &cfg, &res, &bounds, &mut seed::rng(0)).unwrap();
    // mu_1 = (1/2, 1/2): scores 4 - 0.6 = 3.4 and 2.5 - 0.75 = 1.75.
    assert_eq!(traj.total_reward, 4.0);
}

#[test]
fn runs_are_reproducible() {
    for kind in all_generators(3, 4, 64) {
        let g = StreamSpec::new(kind, 5, 9, 64).generate().unwrap();
        let mut cfg = AllocatorConfig::new(ReferenceFunction::NegEntropy, StepSize::Fixed(0.05))
            .with_full_path();
        cfg.consumption = ConsumptionMode::Realized;
        let a = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(g.outcome_seed)).unwrap();
        let b = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(g.outcome_seed)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn stream_length_must_match_horizon() {
    let (res, bounds) = one_resource(0.5, 3);
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(1.0));
    let e = run(&[binary(1.0, 1.0)], &cfg, &res, &bounds, &mut seed::rng(0)).unwrap_err();
    assert_eq!(e, AllocatorError::Length { expected: 3, got: 1 });
}

#[test]
fn auto_step_uses_regret_constants() {
    let (res, bounds) = one_resource(0.5, 100);
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Auto);
    let a = Allocator::new(cfg, &res, &bounds).unwrap();
    // C2 = (1 + 0.5)^2 / 2, C3 = (1/0.5)^2 / 2.
    let expect = (2.0 / (1.125 * 100.0f64)).sqrt();
    assert!((a.eta() - expect).abs() < 1e-15);
}

fn configs() -> Vec<AllocatorConfig> {
    let mut out = Vec::new();
    for h in [
        ReferenceFunction::ogd(),
        ReferenceFunction::NegEntropy,
        ReferenceFunction::NegEntropyProjected { f_bar: 10.0 },
    ] {
        for feas in [FeasibilityMode::VoidOnOverflow, FeasibilityMode::ConstrainedArgmax] {
            for cons in [ConsumptionMode::Expected, ConsumptionMode::Realized] {
                let mut c = AllocatorConfig::new(h.clone(), StepSize::Fixed(0.3)).with_full_path();
                c.feasibility = feas;
                c.consumption = cons;
                out.push(c);
            }
        }
    }
    out
}

#[test]
fn every_mode_keeps_budgets_and_logs_consistently() {
    for kind in all_generators(3, 5, 48) {
        for (i, cfg) in configs().into_iter().enumerate() {
            let g = StreamSpec::new(kind.clone(), i as u64, 7, 48).generate().unwrap();
            let cfg = match cfg.reference {
                ReferenceFunction::NegEntropyProjected { .. } => AllocatorConfig {
                    reference: ReferenceFunction::NegEntropyProjected { f_bar: g.bounds.f_bar },
                    ..cfg
                },
                _ => cfg,
            };
            let traj = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(g.outcome_seed))
                .unwrap_or_else(|e| panic!("{}: {e}", kind.tag()));
            check_feasibility(&traj, &g.resources).unwrap();
            check_stopping_time(&traj, &g.resources, &g.bounds).unwrap();
            check_iterate_stability(&traj).unwrap();
            check_omd_regret(&traj).unwrap();
            assert!(!check_stopping_time_bound(&traj).is_violated());
            let total: f64 = traj.steps.iter().map(|s| s.realized_reward).sum();
            assert!((total - traj.total_reward).abs() < 1e-9 * total.abs().max(1.0));
            for s in traj.steps.iter().filter(|s| s.voided) {
                assert_eq!(s.realized_reward, 0.0);
                assert!(s.realized_consumption.iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn stopping_time_bound_holds_on_synthetic_lp() {
    let t = 2000;
    for seed in 0..5 {
        let kind = StreamKind::IidLp {
            m: 5,
            d: 10,
            r_bar: 10.0,
            domain: LinearDomain::SubSimplex,
        };
        let g = StreamSpec::new(kind, seed, seed + 100, t).generate().unwrap();
        let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(1.0 / (t as f64).sqrt()));
        let traj = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(0)).unwrap();
        assert_eq!(check_stopping_time_bound(&traj), StoppingBoundOutcome::Holds);
    }
}

#[test]
fn large_step_skips_stopping_time_bound() {
    let g = StreamSpec::new(StreamKind::AdversarialLb { t_hat: 10, branch: 1 }, 0, 0, 40)
        .generate()
        .unwrap();
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(5.0));
    let traj = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(0)).unwrap();
    assert!(matches!(check_stopping_time_bound(&traj), StoppingBoundOutcome::Skipped(_)));
}

#[test]
fn stopping_time_at_horizon_satisfies_bound() {
    // Budget never binds: every request is free.
    let (res, bounds) = one_resource(0.5, 30);
    let reqs: Vec<_> = (0..30).map(|_| binary(1.0, 0.0)).collect();
    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(0.01)).with_full_path();
    let traj = run(&reqs, &cfg, &res, &bounds, &mut seed::rng(0)).unwrap();
    assert_eq!(traj.stopping_time, 30);
    assert_eq!(recompute_stopping_time(&traj, &res, &bounds), Some(30));
    assert_eq!(check_stopping_time_bound(&traj), StoppingBoundOutcome::Holds);
}

#[test]
fn weighted_l2_matches_normalised_consumption() {
    let t = 300;
    let g = StreamSpec::new(StreamKind::iid_lp(4, 6), 3, 4, t).generate().unwrap();
    let rho = g.resources.rho().to_vec();
    let eta = 0.05;
    let weighted = AllocatorConfig::new(
        ReferenceFunction::SquaredL2 {
            weights: Some(rho.clone()),
        },
        StepSize::Fixed(eta),
    )
    .with_full_path();
    let a = run(&g.requests, &weighted, &g.resources, &g.bounds, &mut seed::rng(0)).unwrap();

    // Unit weights on consumption divided by rho, so endowments become 1.
    let normalised: Vec<_> = g
        .requests
        .iter()
        .map(|r| match r {
            online_alloc::Request::Linear(l) => {
                let m = l.consumption.rows();
                let d = l.consumption.cols();
                let c = (0..m * d).map(|k| l.consumption.data()[k] / rho[k / d]).collect();
                linear(l.reward.clone(), m, c, l.domain)
            }
            _ => unreachable!(),
        })
        .collect();
    let res = ResourceSpec::new(vec![1.0; rho.len()], t).unwrap();
    let bounds = ProblemBounds::new(g.bounds.f_bar, 1.0 / g.resources.rho_lower(), &res);
    let unit = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(eta)).with_full_path();
    let b = run(&normalised, &unit, &res, &bounds, &mut seed::rng(0)).unwrap();

    for (sa, sb) in a.steps.iter().zip(&b.steps) {
        for j in 0..rho.len() {
            // mu' = rho * mu.
            let diff = (sa.mu_before[j] * rho[j] - sb.mu_before[j]).abs();
            assert!(diff < 1e-12, "step mismatch {diff}");
        }
    }
}

#[test]
fn skipped_gate_is_caught_by_feasibility_check() {
    let g = StreamSpec::new(StreamKind::AdversarialLb { t_hat: 25, branch: 2 }, 0, 0, 100)
        .generate()
        .unwrap();
    let mut cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(0.01)).with_full_path();
    cfg.fault = Some(Fault::SkipGate);
    let traj = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(0)).unwrap();
    assert!(check_feasibility(&traj, &g.resources).is_err());
}

#[test]
fn flipped_subgradient_is_caught() {
    let t = 500;
    let g = StreamSpec::new(StreamKind::iid_lp(4, 5), 1, 2, t).generate().unwrap();
    let mut caught = 0;
    for h in [ReferenceFunction::ogd(), ReferenceFunction::NegEntropy] {
        let mut cfg = AllocatorConfig::new(h, StepSize::Fixed(0.1));
        cfg.fault = Some(Fault::FlipSubgradientSign);
        let traj = run(&g.requests, &cfg, &g.resources, &g.bounds, &mut seed::rng(0)).unwrap();
        if check_omd_regret(&traj).is_err() || check_iterate_stability(&traj).is_err() {
            caught += 1;
        }
    }
    assert_eq!(caught, 2);
}

#[test]
fn entropy_stability_is_skipped_outside_the_box() {
    use online_alloc::allocator::stability_precondition;
    // Equality-simplex requests that always overspend push mu without limit.
    let (res, bounds) = one_resource(0.2, 200);
    let reqs: Vec<_> = (0..200)
        .map(|_| linear(vec![1.0], 1, vec![1.0], LinearDomain::EqualitySimplex))
        .collect();
    let mut cfg = AllocatorConfig::new(ReferenceFunction::NegEntropy, StepSize::Fixed(0.5));
    cfg.record_full_path = true;
    let traj = run(&reqs, &cfg, &res, &bounds, &mut seed::rng(0)).unwrap();
    assert!(stability_precondition(&traj).is_some());

    let cfg = AllocatorConfig::new(ReferenceFunction::ogd(), StepSize::Fixed(0.5));
    let traj = run(&reqs, &cfg, &res, &bounds, &mut seed::rng(0)).unwrap();
    assert!(stability_precondition(&traj).is_none());
}
