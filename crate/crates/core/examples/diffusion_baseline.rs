//! The noise schedule of the diffusion baseline, then a short training run
//! on a torus and one reverse-process sample.
//!
//! `cargo run --release --example diffusion_baseline`

use swarmflow::diffusion::{ddpm_sample, train_ddpm, DiffusionSchedule};
use swarmflow::flowmatch::TrainConfig;
use swarmflow::io::{from_points, make_synthetic_dataset, normalize, ShapeKind};
use swarmflow::metrics::{chamfer, MetricsReport};
use swarmflow::models::ModelConfig;

fn main() -> swarmflow::Result<()> {
    let schedule = DiffusionSchedule::linear(100, 1e-4, 0.02)?;
    for t in [1, 25, 50, 75, 100] {
        println!("t {t:>3}  beta {:.5}  alpha_bar {:.4}", schedule.beta(t), schedule.alpha_bar(t));
    }

    let raw = make_synthetic_dataset(ShapeKind::Torus, 256, 1, 3)?;
    let (shape, _) = normalize(&raw[0])?;
    let config = TrainConfig {
        model: ModelConfig::tiny(8),
        steps: 300,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let ckpt = train_ddpm(&[from_points(&shape)], &config, |r| {
        if r.step % 100 == 0 {
            println!("{r}");
        }
    })?;
    let log = ddpm_sample(&ckpt, 256, 1)?;
    println!("CD to torus {:.4}", chamfer(log.current(), &shape)?);
    print!("{}", MetricsReport::evaluate(&[log], None)?);
    Ok(())
}
