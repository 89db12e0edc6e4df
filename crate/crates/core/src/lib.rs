//! Generative swarm trajectories: a flow-matching model over 3D point
//! clouds whose sampled velocity field is filtered through reciprocal
//! collision avoidance, with a diffusion baseline and an evaluation suite.

pub mod autodiff;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod flowmatch;
pub mod io;
pub mod metrics;
pub mod models;
pub mod navigation;
pub mod sampling;

pub use error::{Error, Result};
