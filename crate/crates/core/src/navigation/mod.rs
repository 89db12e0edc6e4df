//! Reciprocal collision avoidance in three dimensions.
//!
//! Each agent is a sphere of radius `κ/2`, so two agents touch exactly when
//! their centers are `κ` apart. Every step, each agent keeps the velocity
//! closest to its preferred one among those that stay outside all of its
//! neighbors' reciprocal velocity obstacles.

mod lp;
mod orca;

use glam::DVec3;

use crate::error::{Error, Result};

pub use lp::{solve_velocity_lp, LpSolution};
pub use orca::{build_orca_halfspace, orca_adjust, orca_adjust_detailed, OrcaReport};

/// Feasible side is `{v : (v - point) · normal >= 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceConstraint {
    pub point: DVec3,
    pub normal: DVec3,
}

impl HalfSpaceConstraint {
    /// Signed distance into the feasible side; negative when violated.
    pub fn slack(&self, v: DVec3) -> f64 {
        (v - self.point).dot(self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavConfig {
    /// Minimum center-to-center separation.
    pub kappa: f64,
    /// Time horizon of the velocity obstacles.
    pub tau: f64,
    /// Speed cap. `None` uses twice the largest preferred speed of the step.
    pub v_max: Option<f64>,
    /// Agents closer than this are considered neighbors. Raised as needed
    /// to `κ + 2 v_max Δt`, the largest approach possible within one step.
    pub neighbor_radius: f64,
    /// Integration step the velocities will be applied over.
    pub dt: f64,
    /// Relative padding added to `κ` when building constraints, so rounding
    /// in the update never brings a pair below `κ`.
    pub margin: f64,
}

impl NavConfig {
    pub fn new(kappa: f64, dt: f64) -> Self {
        Self {
            kappa,
            tau: 10.0 * dt,
            v_max: None,
            neighbor_radius: 4.0 * kappa,
            dt,
            margin: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tau > self.dt) {
            return Err(Error::Config(format!("tau ({}) must exceed dt ({})", self.tau, self.dt)));
        }
        if let Some(v) = self.v_max {
            if !(v > 0.0) {
                return Err(Error::Config(format!("v_max must be positive, got {v}")));
            }
        }
        if !(self.neighbor_radius >= 0.0 && self.margin >= 0.0) {
            return Err(Error::Config("neighbor_radius and margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn combined_radius(&self) -> f64 {
        self.kappa * (1.0 + self.margin)
    }

    pub(crate) fn effective_neighbor_radius(&self, v_max: f64) -> f64 {
        self.neighbor_radius.max(self.combined_radius() + 2.0 * v_max * self.dt)
    }
}
