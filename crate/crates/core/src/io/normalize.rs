use glam::DVec3;

use crate::error::{Error, Result};

/// Per-cloud standardization: `x_norm = (x - centroid) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub centroid: DVec3,
    pub scale: f64,
}

impl NormalizationTransform {
    pub const IDENTITY: Self = Self {
        centroid: DVec3::ZERO,
        scale: 1.0,
    };

    pub fn apply(&self, points: &[DVec3]) -> Vec<DVec3> {
        points.iter().map(|p| (*p - self.centroid) / self.scale).collect()
    }

    pub fn invert(&self, points: &[DVec3]) -> Vec<DVec3> {
        points.iter().map(|p| *p * self.scale + self.centroid).collect()
    }
}

/// Center the cloud and divide by the pooled per-coordinate standard
/// deviation, so every coordinate has unit variance on average.
///
/// A cloud with all points coincident keeps scale 1.
pub fn normalize(points: &[DVec3]) -> Result<(Vec<DVec3>, NormalizationTransform)> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = points.len() as f64;
    let centroid = points.iter().copied().sum::<DVec3>() / n;
    let var = points.iter().map(|p| (*p - centroid).length_squared()).sum::<f64>() / (3.0 * n);
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let t = NormalizationTransform { centroid, scale };
    Ok((t.apply(points), t))
}
