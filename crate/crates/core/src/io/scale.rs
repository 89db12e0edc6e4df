use crate::error::{Error, Result};
use crate::sampling::TrajectoryLog;

/// Mapping from training units to a physical show volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneScale {
    /// Edge of the show cube in meters.
    pub side: f64,
    /// Minimum separation in meters.
    pub kappa_real: f64,
    /// Edge of the cube the normalized training shapes occupy.
    pub training_extent: f64,
}

impl Default for SceneScale {
    fn default() -> Self {
        Self {
            side: 200.0,
            kappa_real: 2.0,
            training_extent: 6.0,
        }
    }
}

impl SceneScale {
    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0 && self.kappa_real > 0.0 && self.training_extent > 0.0) {
            return Err(Error::Config("scene side, kappa and training extent must be positive".into()));
        }
        Ok(())
    }

    /// Meters per training unit.
    pub fn factor(&self) -> f64 {
        self.side / self.training_extent
    }

    pub fn kappa_training(&self) -> f64 {
        self.kappa_real * self.training_extent / self.side
    }
}

/// Scale positions, velocities and `κ` by the same factor. Time is
/// unchanged, so velocities stay consistent with positions.
pub fn to_real_scale(log: &TrajectoryLog, scene: &SceneScale) -> TrajectoryLog {
    let f = scene.factor();
    let scale = |frames: &Vec<Vec<glam::DVec3>>| -> Vec<Vec<glam::DVec3>> {
        frames.iter().map(|fr| fr.iter().map(|p| *p * f).collect()).collect()
    };
    let mut out = log.clone();
    out.positions = scale(&log.positions);
    out.applied_velocities = scale(&log.applied_velocities);
    out.preferred_velocities = scale(&log.preferred_velocities);
    out.meta.kappa = log.meta.kappa * f;
    out.meta.length_scale = log.meta.length_scale * f;
    out
}
