//! Discrete-event simulation of asynchronous stochastic optimization on
//! heterogeneous workers.
//!
//! Workers compute stochastic gradients at their own speeds; the server
//! collects the first `B` arrivals of each round and updates with Rennala SGD,
//! Rennala MVR, or an inexact MVR variant. Alongside the simulator the crate
//! evaluates the matching closed-form time bounds and ships the zero-chain
//! hard instance used for the lower bound, with numeric checks of its
//! properties.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod engine;
pub mod error;
pub mod hardness;
pub mod numeric;
pub mod optim;
pub mod problem;
pub mod theory;
pub mod verify;

pub use delay::{gradients_completed, sample_delays, DelayModel, DelayProfile, RateFunction};
pub use engine::{
    collect_batch, run_method, Arrival, Cluster, Collection, Payload, RunConfig, RunTrace, Runner,
    TraceRecord,
};
pub use error::{Error, Result};
pub use hardness::{prog, ChainInstance, ChainPoint};
pub use optim::{
    inexact_mvr_step, mvr_init, mvr_init_seeded, mvr_step, sgd_step, tuned_params, Hyper, Method,
    MethodKind, Minibatch, MvrState, TunedParams,
};
pub use problem::{Oracle, QuadraticProblem, Sample};
pub use theory::{
    lower_time_bound, mvr_time_bound, sgd_time_bound, t_of_b, universal_completion_times,
    universal_sgd_completion_times, ComplexityReport,
};
