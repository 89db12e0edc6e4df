//! Write and read back the file formats: XYZ clouds, config files,
//! checkpoints and trajectory CSVs.
//!
//! `cargo run --release --example io_roundtrip`

use swarmflow::flowmatch::{train, TrainConfig};
use swarmflow::io::config::RunConfig;
use swarmflow::io::trajectory::{read_trajectory, write_trajectory};
use swarmflow::io::{
    from_points, load_pointcloud, make_synthetic_dataset, normalize, save_pointcloud, Checkpoint, ShapeKind,
};
use swarmflow::models::ModelConfig;
use swarmflow::sampling::{sample, SampleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("swarmflow-io-demo");
    std::fs::create_dir_all(&dir)?;

    let cloud = &make_synthetic_dataset(ShapeKind::TwoBoxPlane, 200, 1, 0)?[0];
    let xyz = dir.join("plane.xyz");
    save_pointcloud(&xyz, cloud)?;
    println!("xyz: {} points back from {}", load_pointcloud(&xyz)?.len(), xyz.display());

    let cfg_path = dir.join("run.cfg");
    std::fs::write(&cfg_path, "# tiny run\ntrain_steps = 20\nlatent_dim = 4\nagents = 64\nsample_steps = 10\n")?;
    let run = RunConfig::load(&cfg_path)?;
    println!("config: {} steps, {} agents", run.train.steps, run.sample.agents);

    let (shape, _) = normalize(cloud)?;
    let config = TrainConfig {
        model: ModelConfig::tiny(run.train.model.latent_dim),
        ..run.train
    };
    let ckpt = train(&[from_points(&shape)], &config)?;
    let ckpt_path = dir.join("model.ckpt");
    ckpt.save(&ckpt_path)?;
    let loaded = Checkpoint::load(&ckpt_path)?;
    println!("checkpoint: {} bytes, identical after reload: {}", ckpt.to_bytes().len(), loaded.to_bytes() == ckpt.to_bytes());

    let log = sample(&loaded, &SampleConfig::new(run.sample.agents, run.sample.steps, config.kappa, 0))?;
    let csv = dir.join("trajectory.csv");
    write_trajectory(&csv, &log)?;
    let back = read_trajectory(&csv)?;
    println!("trajectory: {} frames of {} agents in {}", back.positions.len(), back.agents(), csv.display());
    Ok(())
}
