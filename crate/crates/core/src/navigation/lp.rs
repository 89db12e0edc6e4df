//! Incremental low-dimensional solver for "closest velocity to a preferred
//! one inside a speed ball and an intersection of half-spaces".
//!
//! Port of the three-dimensional linear programs used by reciprocal
//! velocity obstacle libraries: a 1D solve along a line, a 2D solve on a
//! plane, the 3D incremental solve, and a fallback that minimizes the
//! largest constraint violation when the intersection is empty.

use glam::DVec3;

use super::HalfSpaceConstraint;

const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Line {
    point: DVec3,
    direction: DVec3,
}

fn violated(plane: &HalfSpaceConstraint, v: DVec3) -> f64 {
    plane.normal.dot(plane.point - v)
}

fn program1(
    planes: &[HalfSpaceConstraint],
    plane_no: usize,
    line: Line,
    radius: f64,
    opt: DVec3,
    direction_opt: bool,
    result: &mut DVec3,
) -> bool {
    let dot = line.point.dot(line.direction);
    let disc = dot * dot + radius * radius - line.point.length_squared();
    if disc < 0.0 {
        return false;
    }
    let sq = disc.sqrt();
    let mut t_left = -dot - sq;
    let mut t_right = -dot + sq;
    for plane in &planes[..plane_no] {
        let numerator = (plane.point - line.point).dot(plane.normal);
        let denominator = line.direction.dot(plane.normal);
        if denominator * denominator <= EPSILON {
            if numerator > 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_left = t_left.max(t);
        } else {
            t_right = t_right.min(t);
        }
        if t_left > t_right {
            return false;
        }
    }
    *result = if direction_opt {
        if opt.dot(line.direction) > 0.0 {
            line.point + t_right * line.direction
        } else {
            line.point + t_left * line.direction
        }
    } else {
        let t = line.direction.dot(opt - line.point).clamp(t_left, t_right);
        line.point + t * line.direction
    };
    true
}

fn program2(
    planes: &[HalfSpaceConstraint],
    plane_no: usize,
    radius: f64,
    opt: DVec3,
    direction_opt: bool,
    result: &mut DVec3,
) -> bool {
    let plane = planes[plane_no];
    let plane_dist = plane.point.dot(plane.normal);
    let plane_dist_sq = plane_dist * plane_dist;
    let radius_sq = radius * radius;
    if plane_dist_sq > radius_sq {
        return false;
    }
    let plane_radius_sq = radius_sq - plane_dist_sq;
    let center = plane_dist * plane.normal;

    if direction_opt {
        let in_plane = opt - opt.dot(plane.normal) * plane.normal;
        let len_sq = in_plane.length_squared();
        *result = if len_sq <= EPSILON {
            center
        } else {
            center + (plane_radius_sq / len_sq).sqrt() * in_plane
        };
    } else {
        *result = opt + (plane.point - opt).dot(plane.normal) * plane.normal;
        if result.length_squared() > radius_sq {
            let offset = *result - center;
            *result = center + (plane_radius_sq / offset.length_squared()).sqrt() * offset;
        }
    }

    for i in 0..plane_no {
        if violated(&planes[i], *result) > 0.0 {
            let cross = planes[i].normal.cross(plane.normal);
            if cross.length_squared() <= EPSILON {
                // parallel and facing away: plane_no already excludes the rest
                return false;
            }
            let direction = cross.normalize();
            let line_normal = direction.cross(plane.normal);
            let point = plane.point
                + ((planes[i].point - plane.point).dot(planes[i].normal) / line_normal.dot(planes[i].normal))
                    * line_normal;
            if !program1(planes, i, Line { point, direction }, radius, opt, direction_opt, result) {
                return false;
            }
        }
    }
    true
}

/// Returns the index of the first plane that could not be satisfied, or
/// `planes.len()` on success. `result` holds the best point found so far.
fn program3(planes: &[HalfSpaceConstraint], radius: f64, opt: DVec3, direction_opt: bool, result: &mut DVec3) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.length_squared() > radius * radius {
        opt.normalize() * radius
    } else {
        opt
    };
    for i in 0..planes.len() {
        if violated(&planes[i], *result) > 0.0 {
            let previous = *result;
            if !program2(planes, i, radius, opt, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    planes.len()
}

fn program4(planes: &[HalfSpaceConstraint], begin: usize, radius: f64, result: &mut DVec3) {
    let mut distance = 0.0;
    for i in begin..planes.len() {
        if violated(&planes[i], *result) > distance {
            let mut projected = Vec::with_capacity(i);
            for j in 0..i {
                let cross = planes[j].normal.cross(planes[i].normal);
                let point = if cross.length_squared() <= EPSILON {
                    if planes[i].normal.dot(planes[j].normal) > 0.0 {
                        continue;
                    }
                    0.5 * (planes[i].point + planes[j].point)
                } else {
                    let line_normal = cross.cross(planes[i].normal);
                    planes[i].point
                        + ((planes[j].point - planes[i].point).dot(planes[j].normal)
                            / line_normal.dot(planes[j].normal))
                            * line_normal
                };
                projected.push(HalfSpaceConstraint {
                    point,
                    normal: (planes[j].normal - planes[i].normal).normalize(),
                });
            }
            let previous = *result;
            if program3(&projected, radius, planes[i].normal, true, result) < projected.len() {
                // rounding only; keep the previous point
                *result = previous;
            }
            distance = violated(&planes[i], *result);
        }
    }
}

/// Outcome of [`solve_velocity_lp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSolution {
    pub velocity: DVec3,
    /// `false` when the constraints have no common point inside the speed
    /// ball and `velocity` minimizes the largest violation instead.
    pub feasible: bool,
}

/// Closest point to `v_pref` in the speed ball of radius `v_max` that
/// satisfies every constraint. When the feasible set is empty the point
/// minimizing the maximum signed distance to violation is returned.
pub fn solve_velocity_lp(v_pref: DVec3, constraints: &[HalfSpaceConstraint], v_max: f64) -> LpSolution {
    let mut v = DVec3::ZERO;
    let failed = program3(constraints, v_max, v_pref, false, &mut v);
    if failed < constraints.len() {
        program4(constraints, failed, v_max, &mut v);
        return LpSolution {
            velocity: v,
            feasible: false,
        };
    }
    LpSolution {
        velocity: v,
        feasible: true,
    }
}

/// Only the feasibility part of [`solve_velocity_lp`]; `None` when empty.
pub(crate) fn try_solve(v_pref: DVec3, constraints: &[HalfSpaceConstraint], v_max: f64) -> Option<DVec3> {
    let mut v = DVec3::ZERO;
    (program3(constraints, v_max, v_pref, false, &mut v) == constraints.len()).then_some(v)
}

/// Least-violation point for an infeasible set.
pub(crate) fn least_violation(v_pref: DVec3, constraints: &[HalfSpaceConstraint], v_max: f64) -> DVec3 {
    solve_velocity_lp(v_pref, constraints, v_max).velocity
}
