//! Desk-scale synthetic shapes used in place of a mesh dataset.
//!
//! Points are sampled uniformly by surface area (by arc length for the
//! helix). Clouds are returned unnormalized.

use std::f64::consts::TAU;
use std::str::FromStr;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.4;
pub const HELIX_RADIUS: f64 = 1.0;
pub const HELIX_TURNS: f64 = 3.0;
pub const HELIX_HEIGHT: f64 = 2.0;

/// Fuselage and wing as axis-aligned half extents.
const PLANE_BOXES: [DVec3; 2] = [DVec3::new(1.0, 0.15, 0.15), DVec3::new(0.25, 1.0, 0.03)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Torus,
    TwoBoxPlane,
    Helix,
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "torus" => Ok(Self::Torus),
            "two-box-plane" => Ok(Self::TwoBoxPlane),
            "helix" => Ok(Self::Helix),
            other => Err(Error::Config(format!(
                "unknown shape `{other}` (expected sphere, torus, two-box-plane or helix)"
            ))),
        }
    }
}

fn sphere_point<R: Rng + ?Sized>(rng: &mut R) -> DVec3 {
    loop {
        let v = DVec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = v.length();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn torus_point<R: Rng + ?Sized>(rng: &mut R) -> DVec3 {
    let (big, small) = (TORUS_MAJOR, TORUS_MINOR);
    loop {
        let u = rng.random_range(0.0..TAU);
        let v = rng.random_range(0.0..TAU);
        // area element is proportional to R + r cos v
        if rng.random_range(0.0..big + small) <= big + small * v.cos() {
            let rho = big + small * v.cos();
            return DVec3::new(rho * u.cos(), rho * u.sin(), small * v.sin());
        }
    }
}

fn box_surface_point<R: Rng + ?Sized>(rng: &mut R, h: DVec3) -> DVec3 {
    let areas = [h.y * h.z, h.x * h.z, h.x * h.y];
    let mut pick = rng.random_range(0.0..areas.iter().sum::<f64>());
    let mut axis = 2;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            axis = i;
            break;
        }
        pick -= a;
    }
    let mut p = DVec3::new(
        rng.random_range(-h.x..=h.x),
        rng.random_range(-h.y..=h.y),
        rng.random_range(-h.z..=h.z),
    );
    p[axis] = if rng.random_bool(0.5) { h[axis] } else { -h[axis] };
    p
}

fn plane_point<R: Rng + ?Sized>(rng: &mut R) -> DVec3 {
    let area = |h: DVec3| h.x * h.y + h.y * h.z + h.x * h.z;
    let (a0, a1) = (area(PLANE_BOXES[0]), area(PLANE_BOXES[1]));
    let h = if rng.random_range(0.0..a0 + a1) < a0 {
        PLANE_BOXES[0]
    } else {
        PLANE_BOXES[1]
    };
    box_surface_point(rng, h)
}

fn helix_point<R: Rng + ?Sized>(rng: &mut R) -> DVec3 {
    // constant pitch, so arc length is linear in the parameter
    let s: f64 = rng.random_range(0.0..=1.0);
    let a = TAU * HELIX_TURNS * s;
    DVec3::new(HELIX_RADIUS * a.cos(), HELIX_RADIUS * a.sin(), HELIX_HEIGHT * (s - 0.5))
}

/// `count` independent samples of `n` points each from one shape.
pub fn make_synthetic_dataset(kind: ShapeKind, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<DVec3>>> {
    if n == 0 || count == 0 {
        return Err(Error::Config("point count and cloud count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: fn(&mut ChaCha8Rng) -> DVec3 = match kind {
        ShapeKind::Sphere => sphere_point,
        ShapeKind::Torus => torus_point,
        ShapeKind::TwoBoxPlane => plane_point,
        ShapeKind::Helix => helix_point,
    };
    Ok((0..count).map(|_| (0..n).map(|_| sample(&mut rng)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_are_on_unit_sphere() {
        let d = make_synthetic_dataset(ShapeKind::Sphere, 2048, 1, 1).unwrap();
        assert!(d[0].iter().all(|p| (p.length() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_data() {
        for kind in [ShapeKind::Sphere, ShapeKind::Torus, ShapeKind::TwoBoxPlane, ShapeKind::Helix] {
            let a = make_synthetic_dataset(kind, 100, 2, 9).unwrap();
            let b = make_synthetic_dataset(kind, 100, 2, 9).unwrap();
            assert_eq!(a, b);
            assert_ne!(a[0], a[1]);
        }
    }

    #[test]
    fn torus_radii_match_parameters() {
        let d = make_synthetic_dataset(ShapeKind::Torus, 20000, 1, 2).unwrap();
        let rho: Vec<f64> = d[0].iter().map(|p| p.truncate().length()).collect();
        let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rho.iter().copied().fold(0.0, f64::max);
        assert!(lo >= TORUS_MAJOR - TORUS_MINOR - 1e-12 && lo < TORUS_MAJOR - TORUS_MINOR + 1e-3);
        assert!(hi <= TORUS_MAJOR + TORUS_MINOR + 1e-12 && hi > TORUS_MAJOR + TORUS_MINOR - 1e-3);
        for (p, r) in d[0].iter().zip(&rho) {
            let tube = ((r - TORUS_MAJOR).powi(2) + p.z * p.z).sqrt();
            assert!((tube - TORUS_MINOR).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_points_lie_on_a_box_face() {
        let d = make_synthetic_dataset(ShapeKind::TwoBoxPlane, 500, 1, 3).unwrap();
        for p in &d[0] {
            let on = PLANE_BOXES.iter().any(|h| {
                let inside = p.abs().cmple(*h + 1e-12).all();
                let face = (p.abs() - *h).abs().min_element() < 1e-12;
                inside && face
            });
            assert!(on, "{p:?}");
        }
    }

    #[test]
    fn helix_on_its_cylinder() {
        let d = make_synthetic_dataset(ShapeKind::Helix, 500, 1, 4).unwrap();
        assert!(d[0].iter().all(|p| (p.truncate().length() - HELIX_RADIUS).abs() < 1e-12));
        assert!(d[0].iter().all(|p| p.z.abs() <= HELIX_HEIGHT / 2.0));
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("two-box-plane".parse::<ShapeKind>().unwrap(), ShapeKind::TwoBoxPlane);
        assert!("cube".parse::<ShapeKind>().is_err());
        assert!(make_synthetic_dataset(ShapeKind::Sphere, 0, 1, 0).is_err());
    }
}
