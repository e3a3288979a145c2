//! Parallel execution of an experiment's sweep.
//!
//! Work is split into jobs, one per (sweep point, trial). Every job derives its
//! seeds from the master seed and its trial index alone and results are
//! collected in job order, so the output does not depend on the thread count.
//! All algorithms and step scales of a job share the same request stream and
//! outcome seed.

use std::time::Instant;

use online_alloc::allocator::{
    check_feasibility, check_iterate_stability, check_omd_regret, check_stopping_time,
    check_stopping_time_bound, stability_precondition, Fault, StoppingBoundOutcome,
};
use online_alloc::eval::{dual_bound, opt_exact_enumeration, BenchmarkRecord};
use online_alloc::model::{ProblemBounds, ResourceSpec, Trajectory};
use online_alloc::streams::StreamSpec;
use online_alloc::{run, seed, AllocatorConfig, ReferenceFunction, StepSize};
use rayon::prelude::*;

use crate::config::{AlgorithmConfig, ExperimentConfig, ReferenceName, StepRule, SweepPoint};
use crate::CliError;

/// Seed labels below the master seed.
const MODEL_BRANCH: u64 = 1;
const TRIAL_BRANCH: u64 = 2;

/// `(model_seed, trial_seed)` for one trial.
pub fn trial_seeds(master: u64, draw: usize, trial: usize) -> (u64, u64) {
    let model = seed::derive(seed::derive(master, MODEL_BRANCH), draw as u64);
    let run = seed::derive(seed::derive(master, TRIAL_BRANCH), trial as u64);
    (model, run)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub full_path: bool,
    pub fault: Option<Fault>,
}

/// Outcome of the invariant checks for one run; `None` means passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunChecks {
    pub feasibility: Option<String>,
    /// Only evaluated when the per-step log was recorded.
    pub stopping_time: Option<Option<String>>,
    /// `None` when the iterates left the domain the bound assumes.
    pub stability: Option<Option<String>>,
    pub omd: Option<String>,
    pub stopping_bound: StoppingBoundOutcome,
}

impl RunChecks {
    pub fn evaluate(traj: &Trajectory, resources: &ResourceSpec, bounds: &ProblemBounds) -> Self {
        let msg = |r: Result<(), online_alloc::allocator::CheckError>| r.err().map(|e| e.to_string());
        Self {
            feasibility: msg(check_feasibility(traj, resources)),
            stopping_time: (!traj.steps.is_empty()).then(|| msg(check_stopping_time(traj, resources, bounds))),
            stability: stability_precondition(traj)
                .is_none()
                .then(|| msg(check_iterate_stability(traj))),
            omd: msg(check_omd_regret(traj)),
            stopping_bound: check_stopping_time_bound(traj),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.feasibility.is_none()
            && !matches!(self.stopping_time, Some(Some(_)))
            && !matches!(self.stability, Some(Some(_)))
            && self.omd.is_none()
            && !self.stopping_bound.is_violated()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub point: usize,
    pub algorithm: usize,
    /// Step scale, `None` for the automatic step size.
    pub s: Option<f64>,
    pub draw: usize,
    pub trial: usize,
    pub record: BenchmarkRecord,
    pub checks: RunChecks,
}

impl RunResult {
    pub fn regret(&self) -> f64 {
        let r = &self.record;
        BenchmarkRecord::regret(r.dual_bound, r.opt_exact, r.total_reward)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    pub results: Vec<RunResult>,
}

impl Experiment {
    pub fn records(&self) -> Vec<BenchmarkRecord> {
        self.results.iter().map(|r| r.record.clone()).collect()
    }
}

pub fn reference_for(name: ReferenceName, resources: &ResourceSpec, bounds: &ProblemBounds) -> ReferenceFunction {
    match name {
        ReferenceName::L2 => ReferenceFunction::ogd(),
        ReferenceName::WeightedL2 => ReferenceFunction::SquaredL2 {
            weights: Some(resources.rho().to_vec()),
        },
        ReferenceName::Entropy => ReferenceFunction::NegEntropy,
        ReferenceName::EntropyProjected => ReferenceFunction::NegEntropyProjected { f_bar: bounds.f_bar },
    }
}

fn step_for(alg: &AlgorithmConfig, s: Option<f64>, horizon: usize, m: usize) -> StepSize {
    match (alg.step, s) {
        (StepRule::Auto, _) | (_, None) => StepSize::Auto,
        (StepRule::Scaled, Some(s)) => {
            let scale = if alg.per_sqrt_m { horizon * m } else { horizon };
            StepSize::Fixed(s / (scale as f64).sqrt())
        }
    }
}

struct Job {
    point: usize,
    draw: usize,
    trial: usize,
}

fn run_job(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    job: &Job,
    master: u64,
    opts: &RunOptions,
) -> Result<Vec<RunResult>, CliError> {
    let (model_seed, trial_seed) = trial_seeds(master, job.draw, job.trial);
    let spec = StreamSpec::new(point.kind.clone(), model_seed, trial_seed, point.horizon);
    let g = spec.generate().map_err(|e| CliError::Config(e.to_string()))?;
    let opt_exact = if cfg.exact {
        opt_exact_enumeration(&g.requests, &g.resources).ok()
    } else {
        None
    };
    let mut out = Vec::new();
    for (a, alg) in cfg.algorithms.iter().enumerate() {
        let scales: Vec<Option<f64>> = match alg.step {
            StepRule::Auto => vec![None],
            StepRule::Scaled => cfg.scales().into_iter().map(Some).collect(),
        };
        for s in scales {
            let mut ac = AllocatorConfig::new(
                reference_for(alg.reference_fn, &g.resources, &g.bounds),
                step_for(alg, s, point.horizon, g.resources.m()),
            );
            ac.feasibility = alg.feasibility.into();
            ac.consumption = alg.consumption.into();
            ac.record_full_path = opts.full_path;
            ac.fault = opts.fault;
            let start = Instant::now();
            let traj = run(&g.requests, &ac, &g.resources, &g.bounds, &mut seed::rng(g.outcome_seed))
                .map_err(|e| CliError::Run(e.to_string()))?;
            let runtime_ns = start.elapsed().as_nanos() as u64;
            let d = dual_bound(&g.requests, &traj.mu_avg, &g.resources).map_err(|e| CliError::Run(e.to_string()))?;
            let checks = RunChecks::evaluate(&traj, &g.resources, &g.bounds);
            let record = BenchmarkRecord {
                experiment_id: cfg.experiment_id.clone(),
                algorithm: alg.name.clone(),
                reference_fn: ac.reference.tag().to_string(),
                stream: point.kind.tag(),
                horizon: point.horizon,
                m: point.m,
                d: point.d,
                model_seed,
                trial_seed,
                eta: traj.diagnostics.eta,
                total_reward: traj.total_reward,
                dual_bound: d,
                opt_exact,
                regret_estimate: d - traj.total_reward,
                stopping_time: traj.stopping_time,
                runtime_ns,
            };
            out.push(RunResult {
                point: job.point,
                algorithm: a,
                s,
                draw: job.draw,
                trial: job.trial,
                record,
                checks,
            });
        }
    }
    Ok(out)
}

/// Run every sweep point, trial, algorithm and step scale of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Experiment, CliError> {
    let points = cfg.points()?;
    let master = opts.seed.unwrap_or(cfg.master_seed);
    let runs = cfg.trials.runs_per_draw;
    let jobs: Vec<Job> = (0..points.len())
        .flat_map(|p| {
            (0..cfg.trials.total()).map(move |trial| Job {
                point: p,
                draw: trial / runs,
                trial,
            })
        })
        .collect();
    let threads = opts.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let batches: Vec<Result<Vec<RunResult>, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_job(cfg, &points[job.point], job, master, opts))
            .collect()
    });
    let mut results = Vec::new();
    for b in batches {
        results.extend(b?);
    }
    Ok(Experiment {
        config: cfg.clone(),
        points,
        results,
    })
}
