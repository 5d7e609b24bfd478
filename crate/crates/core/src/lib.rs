//! Stochastic fish-school simulator.
//!
//! The crate integrates a second-order particle model with pairwise
//! attraction/repulsion, distance-weighted velocity matching, additive
//! positional noise and an optional reflection-based obstacle force. On top
//! of the integrator it provides the school observables (ε-graph components,
//! velocity variance, diameter), a classifier for the four obstacle-avoidance
//! patterns, a critical-noise cohesiveness estimator and an experiment
//! harness with a CLI.

pub mod cohesion;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod patterns;
pub mod sde;
pub mod vector;

pub use error::{Error, Result};
pub use model::{
    ExternalForce, ModelParams, Obstacle, ObstacleAvoidance, SchoolingCriteria, SwarmState,
    ValidatedParams,
};
pub use vector::Vector;
