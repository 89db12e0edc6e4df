use glam::DVec3;
use rayon::prelude::*;

use super::lp::{least_violation, try_solve};
use super::{HalfSpaceConstraint, NavConfig};

/// Direction used when two agents coincide exactly and have the same
/// velocity; the lower-indexed agent gets `+TIE`, the other `-TIE`.
const TIE: DVec3 = DVec3::new(0.8, 0.48, 0.36);

/// A unit vector perpendicular to `p` that flips sign with `p`.
fn odd_perpendicular(p: DVec3) -> DVec3 {
    let axis = if p.x.abs() <= p.y.abs() && p.x.abs() <= p.z.abs() {
        DVec3::X
    } else if p.y.abs() <= p.z.abs() {
        DVec3::Y
    } else {
        DVec3::Z
    };
    p.cross(axis).normalize()
}

fn unit_or(v: DVec3, fallback: impl FnOnce() -> DVec3) -> DVec3 {
    let len = v.length();
    if len > 0.0 && len.is_finite() {
        v / len
    } else {
        fallback()
    }
}

/// Outward unit normal of the velocity-obstacle cone nearest to `rel_vel`
/// and the signed distance to its lateral surface, positive outside.
///
/// The cone has its apex at the origin, axis `rel_pos` and half-angle
/// `asin(radius / |rel_pos|)`. On the axis the nearest surface line is
/// picked with [`odd_perpendicular`].
fn cone_distance(rel_pos: DVec3, rel_vel: DVec3, radius: f64) -> (DVec3, f64) {
    let dist = rel_pos.length();
    let axis = rel_pos / dist;
    let sin_a = radius / dist;
    let cos_a = (dist * dist - radius * radius).sqrt() / dist;
    let along = rel_vel.dot(axis);
    let radial = rel_vel - along * axis;
    let radial_len = radial.length();
    let e = if radial_len > 1e-12 * rel_vel.length() {
        radial / radial_len
    } else {
        odd_perpendicular(rel_pos)
    };
    let n = cos_a * e - sin_a * axis;
    (n, radial_len * cos_a - along * sin_a)
}

fn halfspace(
    p_self: DVec3,
    v_self: DVec3,
    p_other: DVec3,
    v_other: DVec3,
    radius: f64,
    tau: f64,
    dt: f64,
    tie: DVec3,
) -> HalfSpaceConstraint {
    let rel_pos = p_other - p_self;
    let rel_vel = v_self - v_other;
    let dist_sq = rel_pos.length_squared();
    let radius_sq = radius * radius;
    let away = || unit_or(-rel_pos, || tie);

    let (normal, u) = if dist_sq > radius_sq {
        let w = rel_vel - rel_pos / tau;
        let w_len_sq = w.length_squared();
        let dot = w.dot(rel_pos);
        if dot < 0.0 && dot * dot > radius_sq * w_len_sq {
            // nearest boundary point is on the cut-off sphere
            let w_len = w_len_sq.sqrt();
            let n = w / w_len;
            (n, (radius / tau - w_len) * n)
        } else {
            let (n, d) = cone_distance(rel_pos, rel_vel, radius);
            (n, -d * n)
        }
    } else {
        // already within the combined radius: leave it within one step
        let w = rel_vel - rel_pos / dt;
        let w_len = w.length();
        let n = unit_or(w, away);
        (n, (radius / dt - w_len) * n)
    };
    HalfSpaceConstraint {
        point: v_self + 0.5 * u,
        normal,
    }
}

/// Reciprocal half-space for `self` against `other`, each taking half of
/// the avoidance effort. Already-overlapping agents get a constraint that
/// separates them to `combined_radius` within `dt`.
pub fn build_orca_halfspace(
    p_self: DVec3,
    v_self: DVec3,
    p_other: DVec3,
    v_other: DVec3,
    combined_radius: f64,
    tau: f64,
    dt: f64,
) -> HalfSpaceConstraint {
    halfspace(p_self, v_self, p_other, v_other, combined_radius, tau, dt, TIE)
}

/// Diagnostics of one [`orca_adjust_detailed`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct OrcaReport {
    pub velocities: Vec<DVec3>,
    /// Speed cap actually used.
    pub v_max: f64,
    /// Agents whose constraints were rebuilt around a zero velocity.
    pub relaxed: usize,
    /// Agents left with an empty feasible set, which received the
    /// least-violating velocity.
    pub infeasible: usize,
}

/// Minimally adjust preferred velocities so that no pair comes closer than
/// `κ` within the time horizon.
pub fn orca_adjust(v_pref: &[DVec3], positions: &[DVec3], cfg: &NavConfig) -> Vec<DVec3> {
    orca_adjust_detailed(v_pref, positions, cfg).velocities
}

fn neighbors(positions: &[DVec3], radius: f64) -> Vec<Vec<usize>> {
    let r_sq = radius * radius;
    positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            positions
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != i && (*q - *p).length_squared() < r_sq)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// [`orca_adjust`] with diagnostics.
///
/// Constraints for a pair are always built from the same pair of reference
/// velocities, which keeps them reciprocal. References start at the
/// preferred velocities; an agent whose constraints admit no solution has
/// its reference reset to zero, and the round repeats. If it is still stuck,
/// its neighbors' references are reset as well. Zero references are
/// feasible whenever every pair is separated, since standing still then
/// satisfies all constraints.
pub fn orca_adjust_detailed(v_pref: &[DVec3], positions: &[DVec3], cfg: &NavConfig) -> OrcaReport {
    assert_eq!(v_pref.len(), positions.len(), "one preferred velocity per agent");
    let v_max = cfg
        .v_max
        .unwrap_or_else(|| 2.0 * v_pref.iter().map(|v| v.length()).fold(0.0, f64::max));
    let radius = cfg.combined_radius();
    let near = neighbors(positions, cfg.effective_neighbor_radius(v_max));
    let clip = |v: DVec3| if v.length_squared() > v_max * v_max { v.normalize() * v_max } else { v };

    let mut reference = v_pref.to_vec();
    let mut relaxed = vec![false; v_pref.len()];
    loop {
        let solved: Vec<Option<DVec3>> = (0..v_pref.len())
            .into_par_iter()
            .map(|i| {
                if near[i].is_empty() {
                    return Some(clip(v_pref[i]));
                }
                let planes = constraints(i, &near[i], positions, &reference, radius, cfg);
                try_solve(v_pref[i], &planes, v_max)
            })
            .collect();
        let mut changed = false;
        for (i, s) in solved.iter().enumerate() {
            if s.is_some() {
                continue;
            }
            let targets = if relaxed[i] { near[i].as_slice() } else { std::slice::from_ref(&i) };
            for &j in targets {
                if !relaxed[j] {
                    relaxed[j] = true;
                    reference[j] = DVec3::ZERO;
                    changed = true;
                }
            }
        }
        if !changed {
            let mut infeasible = 0;
            let velocities = solved
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    s.unwrap_or_else(|| {
                        infeasible += 1;
                        let planes = constraints(i, &near[i], positions, &reference, radius, cfg);
                        least_violation(v_pref[i], &planes, v_max)
                    })
                })
                .collect();
            return OrcaReport {
                velocities,
                v_max,
                relaxed: relaxed.iter().filter(|&&r| r).count(),
                infeasible,
            };
        }
    }
}

fn constraints(
    i: usize,
    near: &[usize],
    positions: &[DVec3],
    reference: &[DVec3],
    radius: f64,
    cfg: &NavConfig,
) -> Vec<HalfSpaceConstraint> {
    near.iter()
        .map(|&j| {
            let tie = if i < j { TIE } else { -TIE };
            halfspace(positions[i], reference[i], positions[j], reference[j], radius, cfg.tau, cfg.dt, tie)
        })
        .collect()
}
