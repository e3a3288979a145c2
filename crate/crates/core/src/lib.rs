//! Online allocation of shared resources by dual mirror descent.
//!
//! Requests arrive one at a time over a horizon of `T` periods. Each request
//! offers a set of actions with a reward and a resource consumption; the
//! total consumption over the horizon must stay within `T * rho`. The
//! allocator keeps one Lagrange multiplier per resource, answers each request
//! with the action maximising reward minus priced consumption, and updates the
//! multipliers with a mirror-descent step on the dual function.
//!
//! Crate layout:
//!
//! - [`model`]: resources, bounds, requests, per-step outcomes and trajectories.
//! - [`mirror`]: reference functions, Bregman divergences, closed-form dual
//!   steps and the theoretical constants that go with them.
//! - [`subproblems`]: exact per-request solvers for linear, auction, matching
//!   and assortment requests.
//! - [`allocator`]: the online loop plus per-trajectory invariant checks.
//! - [`streams`]: seeded request generators for i.i.d., ergodic, periodic,
//!   corrupted and adversarial input.
//! - [`eval`]: dual bounds, exact small-instance oracles, regret metrics and
//!   aggregation.

pub mod allocator;
pub mod eval;
pub mod mirror;
pub mod model;
pub mod numeric;
pub mod seed;
pub mod streams;
pub mod subproblems;

pub use allocator::{
    run, Allocator, AllocatorConfig, AllocatorError, ConsumptionMode, FeasibilityMode,
    InitialDual, StepSize,
};
pub use mirror::{DualVector, MirrorError, ReferenceFunction};
pub use model::{
    bounds_for_stream, validate_request, Action, AssortmentRequest, AuctionRequest,
    ConsumptionMatrix, LinearDomain, LinearRequest, MatchingRequest, ProblemBounds, Request,
    ResourceSpec, StepOutcome, Trajectory, Violation,
};
pub use streams::{GeneratedStream, StreamError, StreamKind, StreamSpec};
pub use subproblems::{PrimalSolution, SolveError};
