//! Hand-built metric instances and their values from `tests/oracles/metrics.py`.

use glam::DVec3;
use swarmflow::sampling::{TrajectoryLog, TrajectoryMeta};

pub const CHAMFER: f64 = 0.18653189115476303012;
pub const COV: f64 = 0.66666666666666666667;
pub const MMD: f64 = 0.24986909553655979324;
pub const TRAJ: f64 = 24.166666666666666667;
pub const FIN: f64 = 16.666666666666666667;
pub const ACC: f64 = 0.034371438164054188602;
pub const JERK: f64 = 0.1026036878912195542;
pub const DIR: f64 = 0.8219886316071032529;
pub const DIST: f64 = 1.0001509383171025406;

pub fn cloud(n: usize, a: f64, b: f64, s: f64) -> Vec<DVec3> {
    (0..n)
        .map(|i| {
            let i = i as f64;
            DVec3::new(
                s * (a * i + b).sin(),
                s * (1.7 * a * i - b).cos(),
                s * (0.31 * i * i + a).sin(),
            )
        })
        .collect()
}

pub fn meta(kappa: f64) -> TrajectoryMeta {
    TrajectoryMeta {
        algorithm: "oracle".into(),
        seed: 0,
        kappa,
        length_scale: 1.0,
    }
}

pub fn oracle_log() -> TrajectoryLog {
    let (agents, steps) = (12, 9);
    let mut log = TrajectoryLog::start(cloud(agents, 0.7, 0.2, 0.5), 1.0, steps, meta(0.3));
    for k in 0..steps {
        let v: Vec<DVec3> = (0..agents)
            .map(|i| {
                if [(3, 2), (4, 5)].contains(&(k, i)) {
                    return DVec3::ZERO;
                }
                let (k, i) = (k as f64, i as f64);
                DVec3::new((0.4 * k + 0.3 * i).cos(), (0.9 * k - 0.2 * i).sin(), 0.5 * (0.25 * k * i + 1.0).cos())
            })
            .collect();
        log.push(v.clone(), v);
    }
    log
}

