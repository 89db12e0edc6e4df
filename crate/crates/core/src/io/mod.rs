//! File formats, dataset preparation and scale handling.

pub mod checkpoint;
pub mod config;
pub mod normalize;
pub mod scale;
pub mod synthetic;
pub mod trajectory;
pub mod xyz;

use glam::DVec3;

use crate::autodiff::Tensor;

pub use checkpoint::{Algorithm, Checkpoint};
pub use normalize::{normalize, NormalizationTransform};
pub use scale::{to_real_scale, SceneScale};
pub use synthetic::{make_synthetic_dataset, ShapeKind};
pub use xyz::{load_pointcloud, save_pointcloud};

/// View an `[M, 3]` tensor as points.
///
/// # Panics
/// If the tensor is not `[M, 3]`.
pub fn to_points(t: &Tensor) -> Vec<DVec3> {
    assert_eq!(t.dims2().map(|d| d.1), Some(3), "expected an [M, 3] tensor, got {:?}", t.shape());
    t.data().chunks_exact(3).map(DVec3::from_slice).collect()
}

pub fn from_points(points: &[DVec3]) -> Tensor {
    let data = points.iter().flat_map(|p| p.to_array()).collect();
    Tensor::matrix(points.len(), 3, data).expect("3 values per point")
}
