//! Shape quality, collision, smoothness and path-length metrics.
//!
//! Smoothness and distance are computed in whatever units the log carries;
//! convert with [`crate::io::to_real_scale`] first to report meters and
//! seconds.

use std::fmt;

use glam::DVec3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::TrajectoryLog;

/// Factor applied to raw MMD for display.
pub const MMD_DISPLAY_SCALE: f64 = 1e3;

fn mean_nearest_sq(from: &[DVec3], to: &[DVec3]) -> f64 {
    let mins: Vec<f64> = from
        .par_iter()
        .map(|a| to.iter().map(|b| (*a - *b).length_squared()).fold(f64::INFINITY, f64::min))
        .collect();
    mins.iter().sum::<f64>() / from.len() as f64
}

/// Mean squared nearest-neighbor distance from `a` to `b` plus from `b` to
/// `a`.
pub fn chamfer(a: &[DVec3], b: &[DVec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(mean_nearest_sq(a, b) + mean_nearest_sq(b, a))
}

/// Coverage and minimum matching distance of `generated` against
/// `reference`.
///
/// COV is the fraction of reference clouds that are the nearest reference
/// (by Chamfer distance, lowest index on ties) of at least one generated
/// cloud. MMD is the mean over reference clouds of the distance to their
/// closest generated cloud.
pub fn cov_mmd(generated: &[Vec<DVec3>], reference: &[Vec<DVec3>]) -> Result<(f64, f64)> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut d = vec![vec![0.0; reference.len()]; generated.len()];
    for (g, row) in generated.iter().zip(d.iter_mut()) {
        for (r, slot) in reference.iter().zip(row.iter_mut()) {
            *slot = chamfer(g, r)?;
        }
    }
    let mut covered = vec![false; reference.len()];
    for row in &d {
        let mut best = 0;
        for (j, v) in row.iter().enumerate() {
            if *v < row[best] {
                best = j;
            }
        }
        covered[best] = true;
    }
    let cov = covered.iter().filter(|&&c| c).count() as f64 / reference.len() as f64;
    let mmd = (0..reference.len())
        .map(|j| d.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / reference.len() as f64;
    Ok((cov, mmd))
}

/// Percentage of agents with at least one other agent strictly closer than
/// `kappa`.
pub fn frame_collision_pct(points: &[DVec3], kappa: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let k_sq = kappa * kappa;
    let hit = points
        .par_iter()
        .enumerate()
        .filter(|(i, p)| {
            points
                .iter()
                .enumerate()
                .any(|(j, q)| j != *i && (*q - **p).length_squared() < k_sq)
        })
        .count();
    100.0 * hit as f64 / points.len() as f64
}

/// `(TRAJ, FIN)`: the per-frame collision percentage averaged over all
/// frames, and its value on the final frame.
pub fn collision_rates(log: &TrajectoryLog, kappa: f64) -> (f64, f64) {
    let per_frame: Vec<f64> = log.positions.par_iter().map(|f| frame_collision_pct(f, kappa)).collect();
    let traj = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    (traj, *per_frame.last().expect("log has frames"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    /// Length units per step.
    pub acc: f64,
    /// Length units per step.
    pub jerk: f64,
    /// Radians.
    pub dir: f64,
}

fn angle(a: DVec3, b: DVec3) -> f64 {
    a.cross(b).length().atan2(a.dot(b))
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Speed change, jerk and heading change from the applied velocities.
///
/// With the per-step displacements `d_k = v_k Δt`, ACC averages
/// `|‖d_{k+1}‖ - ‖d_k‖|`, JERK averages `‖d_{k+2} - 2 d_{k+1} + d_k‖` and
/// DIR averages the angle between `v_k` and `v_{k+1}`, skipping pairs where
/// either is zero. All means run over agents and steps.
///
/// ACC and JERK are in length units per step, so refining the time grid of
/// a smooth trajectory shrinks them.
pub fn smoothness(log: &TrajectoryLog) -> Smoothness {
    let v = &log.applied_velocities;
    let dt = log.dt;
    let (mut acc, mut n_acc, mut dir, mut n_dir, mut jerk, mut n_jerk) = (0.0, 0, 0.0, 0, 0.0, 0);
    for i in 0..log.agents() {
        for k in 0..v.len().saturating_sub(1) {
            let (a, b) = (v[k][i], v[k + 1][i]);
            acc += (b.length() - a.length()).abs() * dt;
            n_acc += 1;
            if a != DVec3::ZERO && b != DVec3::ZERO {
                dir += angle(a, b);
                n_dir += 1;
            }
        }
        for k in 0..v.len().saturating_sub(2) {
            jerk += (v[k + 2][i] - 2.0 * v[k + 1][i] + v[k][i]).length() * dt;
            n_jerk += 1;
        }
    }
    Smoothness {
        acc: mean(acc, n_acc),
        jerk: mean(jerk, n_jerk),
        dir: mean(dir, n_dir),
    }
}

/// Mean over agents of the summed step lengths.
pub fn distance_traveled(log: &TrajectoryLog) -> f64 {
    let agents = log.agents();
    let mut total = 0.0;
    for i in 0..agents {
        for w in log.positions.windows(2) {
            total += (w[1][i] - w[0][i]).length();
        }
    }
    mean(total, agents)
}

/// Aggregates over a batch of trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub runs: usize,
    /// Only with a reference set.
    pub cov: Option<f64>,
    /// Raw Chamfer units; only with a reference set.
    pub mmd: Option<f64>,
    pub traj_coll_pct: f64,
    pub fin_coll_pct: f64,
    pub acc: f64,
    pub jerk: f64,
    pub dir: f64,
    pub dist: f64,
}

impl MetricsReport {
    /// Collision rates use each log's own `κ`.
    pub fn evaluate(logs: &[TrajectoryLog], reference: Option<&[Vec<DVec3>]>) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::Config("no trajectories to evaluate".into()));
        }
        let n = logs.len() as f64;
        let (mut traj, mut fin, mut acc, mut jerk, mut dir, mut dist) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for log in logs {
            let (t, f) = collision_rates(log, log.meta.kappa);
            let s = smoothness(log);
            traj += t;
            fin += f;
            acc += s.acc;
            jerk += s.jerk;
            dir += s.dir;
            dist += distance_traveled(log);
        }
        let (cov, mmd) = match reference {
            Some(r) => {
                let finals: Vec<Vec<DVec3>> = logs.iter().map(|l| l.current().to_vec()).collect();
                let (c, m) = cov_mmd(&finals, r)?;
                (Some(c), Some(m))
            }
            None => (None, None),
        };
        Ok(Self {
            runs: logs.len(),
            cov,
            mmd,
            traj_coll_pct: traj / n,
            fin_coll_pct: fin / n,
            acc: acc / n,
            jerk: jerk / n,
            dir: dir / n,
            dist: dist / n,
        })
    }

    /// One `key = value` line per metric; absent metrics are omitted.
    pub fn to_key_values(&self) -> String {
        let mut s = format!("runs = {}\n", self.runs);
        if let (Some(c), Some(m)) = (self.cov, self.mmd) {
            s += &format!("cov = {c}\nmmd = {m}\nmmd_x1e3 = {}\n", m * MMD_DISPLAY_SCALE);
        }
        s += &format!(
            "traj_pct = {}\nfin_pct = {}\nacc = {}\njerk = {}\ndir = {}\ndist = {}\n",
            self.traj_coll_pct, self.fin_coll_pct, self.acc, self.jerk, self.dir, self.dist
        );
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} run(s); MMD shown x1e3; smoothness and DIST in log units", self.runs)?;
        let opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |v| format!("{:.4}", v * scale));
        writeln!(
            f,
            "{:>8} {:>10} {:>8} {:>8} {:>10} {:>12} {:>8} {:>10}",
            "COV", "MMD", "TRAJ", "FIN", "ACC", "JERK", "DIR", "DIST"
        )?;
        writeln!(
            f,
            "{:>8} {:>10} {:>8.3} {:>8.3} {:>10.4} {:>12.4} {:>8.4} {:>10.4}",
            opt(self.cov, 1.0),
            opt(self.mmd, MMD_DISPLAY_SCALE),
            self.traj_coll_pct,
            self.fin_coll_pct,
            self.acc,
            self.jerk,
            self.dir,
            self.dist
        )
    }
}
