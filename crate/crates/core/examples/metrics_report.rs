//! Score two hand-made trajectories: a smooth one and a jittery one.
//!
//! `cargo run --example metrics_report`

use glam::DVec3;
use swarmflow::metrics::{chamfer, MetricsReport};
use swarmflow::sampling::{TrajectoryLog, TrajectoryMeta};

fn log(jitter: f64) -> TrajectoryLog {
    let (agents, steps) = (16, 50);
    let start: Vec<DVec3> = (0..agents).map(|i| DVec3::new(i as f64, 0.0, 0.0)).collect();
    let meta = TrajectoryMeta {
        algorithm: format!("demo-{jitter}"),
        seed: 0,
        kappa: 0.5,
        length_scale: 1.0,
    };
    let mut log = TrajectoryLog::start(start, 1.0, steps, meta);
    for k in 0..steps {
        let wobble = if k % 2 == 0 { jitter } else { -jitter };
        let v: Vec<DVec3> = (0..agents).map(|i| DVec3::new(0.0, 4.0, wobble * (i % 4) as f64)).collect();
        log.push(v.clone(), v);
    }
    log
}

fn main() -> swarmflow::Result<()> {
    let target: Vec<DVec3> = (0..16).map(|i| DVec3::new(i as f64, 4.0, 0.0)).collect();
    for jitter in [0.0, 3.0] {
        let l = log(jitter);
        println!("jitter {jitter}: CD to target {:.4}", chamfer(l.current(), &target)?);
        print!("{}", MetricsReport::evaluate(&[l], None)?);
    }
    Ok(())
}
