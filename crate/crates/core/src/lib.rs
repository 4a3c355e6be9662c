//! Simulation toolkit for the stochastic thin-film equation on the periodic
//! unit interval.
//!
//! Two spatial discretizations are provided side by side: the harmonic-mean
//! (Grün–Rumpf) edge metric with its Itô drift, and the node-based
//! central-difference scheme. Around them sit a sampler for the discrete
//! conservative Brownian excursion, statistical diagnostics, and the
//! feasibility/rate-bound arithmetic for the self-similar touch-down ansatz.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod ldp;
pub mod mobility;
pub mod quadrature;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use grid::{DriftMatrix, EdgeField, FilmState, Scheme};
pub use integrator::{SimParams, Termination, TrajectoryRecord};
pub use mobility::Mobility;
