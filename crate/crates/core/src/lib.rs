//! Sparse recovery with spiking and analog distributed solvers.
//!
//! The crate solves `min ‖u‖₁ s.t. Au = f` with four related iterations that
//! share one network architecture (feedforward `Aᵀf`, lateral `-AᵀA`):
//!
//! * [`solvers::LbiState`]: linearized Bregman iteration, analog broadcasts.
//! * [`solvers::BcdState`]: Bregman coordinate descent, one coordinate per step.
//! * [`solvers::HdaState`]: discrete-time hybrid distributed algorithm, where
//!   nodes integrate analog potentials and broadcast ternary spikes.
//! * [`solvers::hopping_run`]: exact event-driven simulation of the
//!   continuous-time spiking dynamics.
//!
//! Supporting modules provide problem synthesis ([`problem`]), noise models
//! ([`noise`]), diagnostics ([`diagnostics`]), a brute-force basis-pursuit
//! oracle ([`oracle`]), file formats ([`io`]) and the experiment drivers
//! ([`harness`]).

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod noise;
pub mod nonlinearity;
pub mod oracle;
pub mod problem;
pub mod rng;
pub mod solvers;

pub use diagnostics::{ComparisonReport, TraceRecord};
pub use error::{Error, Result};
pub use noise::{NoiseKind, NoiseModel};
pub use nonlinearity::{shrink, threshold, Ternary};
pub use oracle::OracleSolution;
pub use problem::{Dictionary, GroundTruth, ProblemInstance, Signal};
pub use solvers::{
    run, BcdPolicy, RunResult, SignalSource, SolverConfig, SolverKind, SpikeEvent, StopReason,
};

pub use nalgebra::{DMatrix, DVector};
