//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

pub mod metric_cases;

use glam::DVec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swarmflow::autodiff::{Graph, Tensor, Var};
use swarmflow::models::{Bound, ParamStore};
use swarmflow::navigation::HalfSpaceConstraint;

pub const FD_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-5;

#[derive(Debug, Default, Clone)]
pub struct GradReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
    /// Parameter name, flat index, analytic and numeric values at `max_rel`.
    pub worst: Option<(String, usize, f64, f64)>,
}

fn eval(params: &ParamStore, f: &dyn Fn(&Graph, &Bound) -> Var) -> (f64, u64) {
    let g = Graph::new();
    let p = params.bind(&g, false).unwrap();
    let v = f(&g, &p);
    (g.item(v), g.branch_signature())
}

/// Compare reverse-mode gradients of every parameter against central
/// differences. Coordinates whose perturbation crosses a ReLU or max-pool
/// switch at every tried step size are skipped and counted.
pub fn gradient_check(params: &ParamStore, f: &dyn Fn(&Graph, &Bound) -> Var) -> GradReport {
    let g = Graph::new();
    let p = params.bind(&g, true).unwrap();
    let loss = f(&g, &p);
    g.backward(loss).unwrap();
    let base_sig = g.branch_signature();
    let grads: Vec<Tensor> = p.vars().iter().map(|&v| g.grad(v)).collect();

    let mut work = params.clone();
    let mut report = GradReport::default();
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for (pi, name) in names.iter().enumerate() {
        let len = params.by_name(name).unwrap().len();
        for k in 0..len {
            let orig = params.by_name(name).unwrap().data()[k];
            let mut eps = FD_EPS;
            let mut numeric = None;
            for _ in 0..4 {
                let set = |w: &mut ParamStore, v: f64| {
                    let t = w.by_name_mut(name).unwrap();
                    let mut d = t.data().to_vec();
                    d[k] = v;
                    *t = Tensor::new(t.shape().to_vec(), d).unwrap();
                };
                set(&mut work, orig + eps);
                let (up, s_up) = eval(&work, f);
                set(&mut work, orig - eps);
                let (down, s_down) = eval(&work, f);
                set(&mut work, orig);
                if s_up == base_sig && s_down == base_sig {
                    numeric = Some((up - down) / (2.0 * eps));
                    break;
                }
                eps /= 10.0;
            }
            let Some(n) = numeric else {
                report.skipped += 1;
                continue;
            };
            let a = grads[pi].data()[k];
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR);
            if rel > report.max_rel {
                report.max_rel = rel;
                report.worst = Some((name.clone(), k, a, n));
            }
            report.checked += 1;
        }
    }
    report
}

/// Exact minimizer of `‖v - v_pref‖` over half-spaces and a speed ball by
/// enumerating every candidate active set of up to three planes, with and
/// without the ball active, and keeping the best feasible candidate.
pub fn qp_oracle(v_pref: DVec3, planes: &[HalfSpaceConstraint], v_max: f64) -> Option<DVec3> {
    let tol = 1e-9;
    let feasible = |v: DVec3| v.length() <= v_max * (1.0 + tol) && planes.iter().all(|h| h.slack(v) >= -tol);
    let mut cands: Vec<DVec3> = Vec::new();
    let ball = |v: DVec3| if v.length() > 1e-300 { v.normalize() * v_max } else { DVec3::ZERO };
    cands.push(v_pref);
    cands.push(ball(v_pref));
    let n = planes.len();
    let proj_plane = |v: DVec3, h: &HalfSpaceConstraint| v - h.normal * (v - h.point).dot(h.normal);
    for i in 0..n {
        let h = &planes[i];
        let p = proj_plane(v_pref, h);
        cands.push(p);
        // ball active on the plane: circle of the plane inside the sphere
        let c = h.normal * h.point.dot(h.normal);
        let r2 = v_max * v_max - c.length_squared();
        if r2 >= 0.0 {
            let d = p - c;
            if d.length() > 1e-300 {
                cands.push(c + d.normalize() * r2.sqrt());
            }
        }
        for j in i + 1..n {
            let (a, b) = (&planes[i], &planes[j]);
            let dir = a.normal.cross(b.normal);
            if dir.length_squared() < 1e-20 {
                continue;
            }
            let dir = dir.normalize();
            // a point on both planes: solve in the span of the normals
            let m = nalgebra::Matrix2::new(
                1.0,
                a.normal.dot(b.normal),
                a.normal.dot(b.normal),
                1.0,
            );
            let rhs = nalgebra::Vector2::new(a.point.dot(a.normal), b.point.dot(b.normal));
            let Some(coef) = m.lu().solve(&rhs) else { continue };
            let base = a.normal * coef[0] + b.normal * coef[1];
            let on_line = base + dir * (v_pref - base).dot(dir);
            cands.push(on_line);
            // ball active on the line
            let bd = base.dot(dir);
            let disc = bd * bd - (base.length_squared() - v_max * v_max);
            if disc >= 0.0 {
                for s in [-1.0, 1.0] {
                    cands.push(base + dir * (-bd + s * disc.sqrt()));
                }
            }
            for k in j + 1..n {
                let c = &planes[k];
                let m = nalgebra::Matrix3::from_rows(&[
                    nalgebra::RowVector3::new(a.normal.x, a.normal.y, a.normal.z),
                    nalgebra::RowVector3::new(b.normal.x, b.normal.y, b.normal.z),
                    nalgebra::RowVector3::new(c.normal.x, c.normal.y, c.normal.z),
                ]);
                let rhs = nalgebra::Vector3::new(a.point.dot(a.normal), b.point.dot(b.normal), c.point.dot(c.normal));
                if let Some(x) = m.lu().solve(&rhs) {
                    cands.push(DVec3::new(x[0], x[1], x[2]));
                }
            }
        }
    }
    cands
        .into_iter()
        .filter(|v| v.is_finite() && feasible(*v))
        .min_by(|a, b| (*a - v_pref).length().total_cmp(&(*b - v_pref).length()))
}

pub fn brute_chamfer(a: &[DVec3], b: &[DVec3]) -> f64 {
    let one = |x: &[DVec3], y: &[DVec3]| {
        let mut s = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                if d < best {
                    best = d;
                }
            }
            s += best;
        }
        s / x.len() as f64
    };
    one(a, b) + one(b, a)
}

/// Smallest distance between any two points.
pub fn min_pair_distance(points: &[DVec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).length());
        }
    }
    best
}

/// Uniformly random unit vector.
pub fn unit(rng: &mut ChaCha8Rng) -> DVec3 {
    loop {
        let v = DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.length_squared() > 1e-4 && v.length_squared() <= 1.0 {
            return v.normalize();
        }
    }
}

/// `agents` points in a cube of side `side`, pairwise at least `kappa` apart.
pub fn safe_scene(rng: &mut ChaCha8Rng, agents: usize, side: f64, kappa: f64) -> Vec<DVec3> {
    let mut pts: Vec<DVec3> = Vec::with_capacity(agents);
    while pts.len() < agents {
        let p = DVec3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side));
        if pts.iter().all(|q| (*q - p).length() >= kappa) {
            pts.push(p);
        }
    }
    pts
}
