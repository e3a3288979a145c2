//! Invariant verification: runs many seeded trajectories with the per-step log
//! enabled and tallies every check.

use std::fmt;

use online_alloc::allocator::{Fault, StoppingBoundOutcome};
use online_alloc::eval::{dual_bound, opt_exact_enumeration};
use online_alloc::model::{ConsumptionMatrix, LinearDomain, LinearRequest, Request, ResourceSpec};
use online_alloc::streams::{CorruptionMode, Placement, StreamKind, StreamSpec, ValueDist};
use online_alloc::{run, seed, AllocatorConfig, ConsumptionMode, FeasibilityMode, StepSize};
use rand::Rng;

use crate::config::{ExperimentConfig, ReferenceName};
use crate::runner::{reference_for, run_experiment, RunChecks, RunOptions};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            skipped: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, outcome: Option<Option<String>>, context: &str) {
        match outcome {
            None => self.skipped += 1,
            Some(None) => self.passed += 1,
            Some(Some(msg)) => {
                self.failed += 1;
                if self.first_failure.is_none() {
                    self.first_failure = Some(format!("{context}: {msg}"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub tallies: Vec<Tally>,
}

impl VerifyReport {
    fn new() -> Self {
        let names = [
            "feasibility",
            "stopping time",
            "iterate stability",
            "omd regret",
            "stopping time bound",
            "weak duality",
        ];
        Self {
            tallies: names.into_iter().map(Tally::new).collect(),
        }
    }

    fn get(&mut self, name: &str) -> &mut Tally {
        self.tallies.iter_mut().find(|t| t.name == name).expect("known check")
    }

    pub fn tally(&self, name: &str) -> Option<&Tally> {
        self.tallies.iter().find(|t| t.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.tallies.iter().all(|t| t.failed == 0)
    }

    fn add_run(&mut self, checks: &RunChecks, context: &str) {
        self.get("feasibility").record(Some(checks.feasibility.clone()), context);
        self.get("stopping time").record(checks.stopping_time.clone(), context);
        self.get("iterate stability").record(checks.stability.clone(), context);
        self.get("omd regret").record(Some(checks.omd.clone()), context);
        let p2 = match &checks.stopping_bound {
            StoppingBoundOutcome::Holds => Some(None),
            StoppingBoundOutcome::Skipped(_) => None,
            StoppingBoundOutcome::Violated(m) => Some(Some(m.clone())),
        };
        self.get("stopping time bound").record(p2, context);
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>8} {:>8} {:>8}", "check", "passed", "failed", "skipped")?;
        for t in &self.tallies {
            writeln!(f, "{:<22} {:>8} {:>8} {:>8}", t.name, t.passed, t.failed, t.skipped)?;
        }
        for t in &self.tallies {
            if let Some(msg) = &t.first_failure {
                writeln!(f, "first {} failure: {msg}", t.name)?;
            }
        }
        write!(f, "{}", if self.all_pass() { "all checks passed" } else { "CHECKS FAILED" })
    }
}

/// Parse the hidden `--fault` argument.
pub fn parse_fault(s: &str) -> Result<Fault, CliError> {
    match s {
        "flip-subgradient-sign" => Ok(Fault::FlipSubgradientSign),
        "skip-gate" => Ok(Fault::SkipGate),
        _ => Err(CliError::Config(format!("unknown fault {s:?}"))),
    }
}

/// Every generator family at a small size.
pub fn suite_streams(horizon: usize) -> Vec<StreamKind> {
    let lp = |domain| StreamKind::IidLp {
        m: 3,
        d: 4,
        r_bar: 10.0,
        domain,
    };
    let auction = StreamKind::AuctionIid {
        v_bar: 2.0,
        values: ValueDist::Uniform { lo: 0.0, hi: 2.0 },
        bids: ValueDist::LogNormal {
            mean_log: -0.5,
            sd_log: 0.5,
        },
        correlated: true,
        rho: 0.3,
    };
    vec![
        lp(LinearDomain::EqualitySimplex),
        lp(LinearDomain::SubSimplex),
        StreamKind::IidLp {
            m: 2,
            d: 1,
            r_bar: 10.0,
            domain: LinearDomain::Binary,
        },
        StreamKind::ergodic_matching(4, 0.5),
        auction.clone(),
        StreamKind::AssortmentIid {
            m: 4,
            r_bar: 5.0,
            max_size: Some(2),
            rho: 0.2,
        },
        StreamKind::Periodic {
            q: 4,
            base: Box::new(lp(LinearDomain::SubSimplex)),
        },
        StreamKind::Corrupted {
            base: Box::new(lp(LinearDomain::SubSimplex)),
            count: horizon / 8,
            mode: CorruptionMode::MaxConsumption,
            placement: Placement::Random,
        },
        StreamKind::Corrupted {
            base: Box::new(auction),
            count: horizon / 4,
            mode: CorruptionMode::ZeroReward,
            placement: Placement::Burst,
        },
        StreamKind::AdversarialLb {
            t_hat: horizon / 4,
            branch: 2,
        },
    ]
}

const SUITE_HORIZON: usize = 400;
const SUITE_SEEDS: u64 = 5;
/// `eta = s / sqrt(T)`; the larger scale breaks the stopping-time precondition for some streams.
const SUITE_SCALES: [f64; 2] = [1.0, 5.0];
const REFERENCES: [ReferenceName; 4] = [
    ReferenceName::L2,
    ReferenceName::WeightedL2,
    ReferenceName::Entropy,
    ReferenceName::EntropyProjected,
];

/// Built-in suite: all generators, reference functions, feasibility and
/// consumption modes, plus weak duality on small binary instances.
pub fn verify_default(fault: Option<Fault>) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport::new();
    let run_err = |e: &dyn fmt::Display| CliError::Run(e.to_string());
    for kind in suite_streams(SUITE_HORIZON) {
        for s in 0..SUITE_SEEDS {
            let spec = StreamSpec::new(kind.clone(), s, 1000 + s, SUITE_HORIZON);
            let g = spec.generate().map_err(|e| run_err(&e))?;
            for name in REFERENCES {
                for feas in [FeasibilityMode::VoidOnOverflow, FeasibilityMode::ConstrainedArgmax] {
                    for cons in [ConsumptionMode::Expected, ConsumptionMode::Realized] {
                        for scale in SUITE_SCALES {
                            let mut ac = AllocatorConfig::new(
                                reference_for(name, &g.resources, &g.bounds),
                                StepSize::Fixed(scale / (SUITE_HORIZON as f64).sqrt()),
                            );
                            ac.feasibility = feas;
                            ac.consumption = cons;
                            ac.record_full_path = true;
                            ac.fault = fault;
                            let traj = run(&g.requests, &ac, &g.resources, &g.bounds, &mut seed::rng(g.outcome_seed))
                                .map_err(|e| run_err(&e))?;
                            let checks = RunChecks::evaluate(&traj, &g.resources, &g.bounds);
                            let context = format!("{} seed {s} {name:?} {feas:?} {cons:?} s={scale}", kind.tag());
                            report.add_run(&checks, &context);
                        }
                    }
                }
            }
        }
    }
    weak_duality(&mut report, 200, 20);
    Ok(report)
}

/// `OPT <= D(mu)` on random binary knapsacks with `T <= 12`.
fn weak_duality(report: &mut VerifyReport, instances: u64, duals: usize) {
    for i in 0..instances {
        let mut rng = seed::rng(seed::derive(0xD0A1, i));
        let horizon = rng.random_range(2..=12);
        let reqs: Vec<Request> = (0..horizon)
            .map(|_| {
                Request::Linear(LinearRequest {
                    reward: vec![rng.random_range(0.0..5.0)],
                    consumption: ConsumptionMatrix::new(1, 1, vec![rng.random_range(0.0..1.0)]).expect("1x1"),
                    domain: LinearDomain::Binary,
                })
            })
            .collect();
        let res = ResourceSpec::new(vec![rng.random_range(0.05..0.95)], horizon).expect("valid rho");
        let opt = match opt_exact_enumeration(&reqs, &res) {
            Ok(v) => v,
            Err(e) => {
                report.get("weak duality").record(Some(Some(e.to_string())), &format!("instance {i}"));
                continue;
            }
        };
        for _ in 0..duals {
            let mu = rng.random_range(0.0..10.0);
            let outcome = match dual_bound(&reqs, &[mu], &res) {
                Ok(d) if opt <= d + 1e-9 => None,
                Ok(d) => Some(format!("OPT {opt} > D({mu}) = {d}")),
                Err(e) => Some(e.to_string()),
            };
            report.get("weak duality").record(Some(outcome), &format!("instance {i}"));
        }
    }
}

/// Run `cfg` with the per-step log and tally the checks of every run.
pub fn verify_config(cfg: &ExperimentConfig, fault: Option<Fault>) -> Result<VerifyReport, CliError> {
    let opts = RunOptions {
        full_path: true,
        fault,
        ..RunOptions::default()
    };
    let exp = run_experiment(cfg, &opts)?;
    let mut report = VerifyReport::new();
    for r in &exp.results {
        let context = format!(
            "{} T={} trial {} s={:?}",
            cfg.algorithms[r.algorithm].name, r.record.horizon, r.trial, r.s
        );
        report.add_run(&r.checks, &context);
    }
    Ok(report)
}
