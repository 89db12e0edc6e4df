//! Train on one synthetic sphere, then compare the samplers on it.
//!
//! `cargo run --release --example sphere_show -- [train_steps]`

use std::time::Instant;

use swarmflow::diffusion::{ddpm_sample, train_ddpm};
use swarmflow::flowmatch::{train_with, Cfm, TrainConfig};
use swarmflow::io::{from_points, make_synthetic_dataset, normalize, to_real_scale, SceneScale, ShapeKind};
use swarmflow::metrics::{chamfer, MetricsReport};
use swarmflow::sampling::{sample, sample_cfm_then_orca, SampleConfig, TrajectoryLog};

fn main() -> swarmflow::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let raw = make_synthetic_dataset(ShapeKind::Sphere, 512, 1, 0)?;
    let (shape, _) = normalize(&raw[0])?;
    let config = TrainConfig {
        steps,
        ..TrainConfig::single_shape()
    };

    let clock = Instant::now();
    let cfm = train_with(&[from_points(&shape)], &config, &Cfm, |r| {
        if r.step % 200 == 0 {
            println!("{r}");
        }
    })?;
    println!("flow matching trained in {:.1?}, final loss {:.4}", clock.elapsed(), cfm.final_loss);
    let clock = Instant::now();
    let ddpm = train_ddpm(&[from_points(&shape)], &config, |_| {})?;
    println!("diffusion trained in {:.1?}, final loss {:.4}", clock.elapsed(), ddpm.final_loss);

    let scene = SceneScale::default();
    let report = |name: &str, log: &TrajectoryLog| -> swarmflow::Result<()> {
        let cd = chamfer(log.current(), &shape)?;
        let real = to_real_scale(log, &scene);
        let r = MetricsReport::evaluate(&[real], None)?;
        println!(
            "{name:<22} CD {cd:.4}  TRAJ {:.3}  FIN {:.3}  ACC {:.3}  JERK {:.1}  DIR {:.4}  DIST {:.2}",
            r.traj_coll_pct, r.fin_coll_pct, r.acc, r.jerk, r.dir, r.dist
        );
        Ok(())
    };
    for n in [5, 25, 100] {
        let clock = Instant::now();
        let log = sample(&cfm, &SampleConfig::new(512, n, config.kappa, 1))?;
        report(&format!("flow+orca {n} steps"), &log)?;
        println!("  ({:.1?})", clock.elapsed());
    }
    let mut plain = SampleConfig::new(512, 100, config.kappa, 1);
    plain.use_orca = false;
    report("flow only", &sample(&cfm, &plain)?)?;
    report("flow then orca", &sample_cfm_then_orca(&cfm, &SampleConfig::new(512, 100, config.kappa, 1))?)?;
    report("diffusion", &ddpm_sample(&ddpm, 512, 1)?)?;
    Ok(())
}
