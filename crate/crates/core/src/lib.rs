//! Desk-scale hardware design-space exploration pipeline.
//!
//! The crate models a high-level-synthesis-like flow end to end:
//!
//! 1. [`ct`] — a tiny C-like kernel language that lowers to a data-flow
//!    graph, plus code emission and two reference interpreters,
//! 2. [`dfg`] — the graph IR with validation and canonical JSON,
//! 3. [`oracle`] — a deterministic analytic LUT/DSP/critical-path cost
//!    model standing in for a vendor synthesis run,
//! 4. [`gpp`] — a from-scratch graph-convolutional cost predictor trained
//!    on oracle labels,
//! 5. [`rlmd`] — an actor-critic agent that walks a graph's multipliers and
//!    assigns LUT-implementation directives to hit a DSP usage target,
//! 6. [`baselines`] — exhaustive search, simulated annealing, and a genetic
//!    algorithm over the same reward,
//! 7. [`datagen`] / [`explore`] — dataset synthesis, Pareto sweeps, and
//!    engine comparison reports.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below pin the default precision used by the CLI, the file
//! formats, and the tests.

pub mod baselines;
pub mod ct;
pub mod datagen;
pub mod dfg;
pub mod evaluator;
pub mod explore;
pub mod features;
pub mod gpp;
pub mod gradcheck;
pub mod io;
pub mod nn;
pub mod oracle;
pub mod reward;
pub mod rlmd;
pub mod scalar;

/// Default scalar for the shipped pipeline.
pub type Real = f64;

/// Exact cost triple at default precision.
pub type CostTriple = oracle::CostTriple<Real>;
/// Cost prediction (exact or model-backed) at default precision.
pub type CostPrediction = reward::CostPrediction<Real>;
/// Reward weights at default precision.
pub type RewardParams = reward::RewardParams<Real>;
/// Graph cost predictor at default precision.
pub type GppModel = gpp::GppModel<Real>;
/// Actor-critic policy at default precision.
pub type ActorCritic = rlmd::ActorCritic<Real>;
