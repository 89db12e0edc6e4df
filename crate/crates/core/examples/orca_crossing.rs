//! Agents on a circle swap with their antipodes. Plain straight-line motion
//! collides in the middle; the collision-avoidance filter keeps every pair
//! at least `κ` apart.
//!
//! `cargo run --release --example orca_crossing`

use glam::DVec3;
use swarmflow::metrics::frame_collision_pct;
use swarmflow::navigation::{orca_adjust, NavConfig};

fn min_distance(p: &[DVec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.min(p[i].distance(p[j]));
        }
    }
    best
}

fn run(filter: bool) -> (f64, f64) {
    let (n, steps, kappa) = (24, 200, 0.3);
    let dt = 1.0 / steps as f64;
    let mut pos: Vec<DVec3> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            DVec3::new(a.cos(), a.sin(), 0.05 * (i % 3) as f64) * 2.0
        })
        .collect();
    let goals: Vec<DVec3> = pos.iter().map(|p| -*p).collect();
    let cfg = NavConfig::new(kappa, dt);
    let mut closest = f64::INFINITY;
    let mut worst_pct: f64 = 0.0;
    for k in 0..steps {
        let left = (steps - k) as f64 * dt;
        let pref: Vec<DVec3> = pos.iter().zip(&goals).map(|(p, g)| (*g - *p) / left).collect();
        let vel = if filter { orca_adjust(&pref, &pos, &cfg) } else { pref };
        for (p, v) in pos.iter_mut().zip(&vel) {
            *p += *v * dt;
        }
        closest = closest.min(min_distance(&pos));
        worst_pct = worst_pct.max(frame_collision_pct(&pos, kappa));
    }
    (closest, worst_pct)
}

fn main() {
    for filter in [false, true] {
        let (closest, pct) = run(filter);
        println!(
            "{:<16} closest pair {closest:.4} (kappa 0.3), worst frame {pct:.1}% agents in collision",
            if filter { "with avoidance" } else { "straight lines" }
        );
    }
}
