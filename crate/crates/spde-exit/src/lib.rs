//! Simulation and bound evaluation for exit-time problems of one-dimensional
//! measure-valued stochastic PDEs.
//!
//! Two models are built in: a branching population whose cumulative mass
//! solves a stochastic heat equation with indicator-driven noise, and a
//! resampling (relative-frequency) model driven by the same noise field on
//! the unit auxiliary interval. On top of the path solver the crate provides
//! exit detectors with Monte Carlo estimation, closed-form upper and lower
//! bounds on exit probabilities and expected exit times with a constructive
//! constants ledger, and small-noise rate functionals with skeleton-path
//! certificates.
//!
//! Start with the `examples/` directory: each file is a runnable walk-through
//! of one capability (path simulation, exit probabilities, bound tables,
//! parameter sweeps, scaling scans, rate evaluation, skeleton controls, mean
//! measure size). The `spde-exit` binary wraps the same entry points behind
//! subcommands for batch use.

pub mod bounds;
pub mod config;
pub mod error;
pub mod exit;
pub mod field;
pub mod gauss;
pub mod grid;
pub mod heat;
pub mod io;
pub mod ldp;
pub mod manifest;
pub mod models;
pub mod noise;
pub mod runner;
pub mod solver;
pub mod weighted;

pub use error::{Error, Result};
