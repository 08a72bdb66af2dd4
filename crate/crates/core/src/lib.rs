//! Transition path theory on point clouds sampled from a manifold.
//!
//! The pipeline builds a reversible Markov jump process on the samples from an
//! approximate Voronoi tessellation, solves the discrete committor, extracts
//! reactive currents, the transition rate and the dominant transition path,
//! and constructs the optimally controlled (Doob-transformed) chain whose
//! random walk turns the A -> B transition into an almost-sure event. Mean
//! transition paths are recovered from controlled walks by local averaging.

pub mod alanine;
pub mod committor;
pub mod config;
pub mod control;
pub mod error;
pub mod generator;
pub mod manifold;
pub mod meanpath;
pub mod path;
pub mod pipeline;
pub mod pointcloud;
pub mod potentials;
pub mod reference;
pub mod sampler;
pub mod tpt;

pub use error::{Error, Result};
