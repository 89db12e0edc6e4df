//! Integrate the exact conditional field from noise to a helix: the path is
//! a straight line per point and lands on the target.
//!
//! `cargo run --release --example flow_paths`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmflow::flowmatch::FlowSchedule;
use swarmflow::io::{make_synthetic_dataset, normalize, to_points, ShapeKind};
use swarmflow::metrics::{chamfer, distance_traveled};
use swarmflow::models::standard_normal;
use swarmflow::sampling::integrate_exact_target;

fn main() -> swarmflow::Result<()> {
    let raw = make_synthetic_dataset(ShapeKind::Helix, 300, 1, 0)?;
    let (target, _) = normalize(&raw[0])?;
    let start = to_points(&standard_normal(&mut ChaCha8Rng::seed_from_u64(5), &[target.len(), 3]));
    let schedule = FlowSchedule::new(1.0, 1e-4)?;
    for steps in [5, 25, 100, 1000] {
        let log = integrate_exact_target(&start, &target, &schedule, steps)?;
        let err = log.current().iter().zip(&target).map(|(a, b)| (*a - *b).abs().max_element()).fold(0.0, f64::max);
        let straight: f64 = start.iter().zip(&target).map(|(a, b)| a.distance(*b)).sum::<f64>() / start.len() as f64;
        println!(
            "{steps:>5} steps  max error {err:.2e}  CD {:.2e}  path length {:.6}  straight line {straight:.6}",
            chamfer(log.current(), &target)?,
            distance_traveled(&log)
        );
    }
    Ok(())
}
