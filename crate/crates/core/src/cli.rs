//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glam::DVec3;

use crate::diffusion::{ddpm_sample, train_ddpm};
use crate::error::{Error, Result};
use crate::flowmatch::{train_with, Cfm, StepRecord};
use crate::io::config::{RunConfig, SampleSettings};
use crate::io::trajectory::{read_trajectory, write_trajectory};
use crate::io::{
    from_points, load_pointcloud, make_synthetic_dataset, normalize, save_pointcloud, to_real_scale, Checkpoint,
    SceneScale, ShapeKind,
};
use crate::metrics::MetricsReport;
use crate::navigation::NavConfig;
use crate::sampling::{sample, sample_cfm_then_orca, SampleConfig, TrajectoryLog};

#[derive(Debug, Parser)]
#[command(name = "swarmflow", version, about = "Train and sample collision-free swarm trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic shapes as XYZ files.
    MakeData {
        #[command(flatten)]
        common: Common,
        /// sphere, torus, two-box-plane or helix.
        #[arg(long, default_value = "sphere")]
        shape: String,
        #[arg(long, default_value_t = 2048)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Train on XYZ files (or directories of them).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Training steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Train the diffusion baseline instead of flow matching.
        #[arg(long)]
        diffusion: bool,
    },
    /// Sample a trajectory from a flow-matching checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sampling steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        /// Plain Euler integration without collision avoidance.
        #[arg(long)]
        no_orca: bool,
        /// Also write the trajectory mapped into a cube of this many meters.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Sample a trajectory from a diffusion checkpoint.
    SampleDiffusion {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Generate a final shape without avoidance, then fly to it with
    /// collision avoidance only.
    SampleCfmOrca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Compute metrics for trajectory CSVs.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        trajectory: Vec<PathBuf>,
        /// Reference clouds for COV and MMD.
        #[arg(long, num_args = 1..)]
        reference: Vec<PathBuf>,
        /// Map trajectories in training units into a cube of this many meters.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Split a trajectory CSV into one XYZ file per frame.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        scale: Option<f64>,
    },
}

/// Parse arguments, run, and map errors to exit status 1. Usage errors exit
/// with status 2 inside the parser.
pub fn main() -> ExitCode {
    if let Some(n) = std::env::var("SWARMFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    path.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn xyz_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "xyz"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no .xyz files found".into()));
    }
    Ok(out)
}

/// Sampling configuration for a horizon and `κ`, honoring config keys.
pub fn sample_config(settings: &SampleSettings, kappa: f64, horizon: f64, seed: u64) -> SampleConfig {
    let dt = horizon / settings.steps.max(1) as f64;
    SampleConfig {
        agents: settings.agents,
        steps: settings.steps,
        use_orca: settings.use_orca,
        seed,
        nav: NavConfig {
            kappa,
            tau: settings.tau_steps * dt,
            v_max: settings.v_max,
            neighbor_radius: settings.neighbor_radius.unwrap_or(4.0 * kappa),
            dt,
            margin: settings.margin,
        },
    }
}

fn scene_for(base: &SceneScale, side: Option<f64>) -> Option<SceneScale> {
    side.map(|side| SceneScale { side, ..*base })
}

fn write_log(dir: &Path, name: &str, log: &TrajectoryLog, scene: Option<SceneScale>) -> Result<()> {
    create_dir(dir)?;
    write_trajectory(&dir.join(format!("{name}.csv")), log)?;
    save_pointcloud(&dir.join(format!("{name}_final.xyz")), log.current())?;
    if let Some(scene) = scene {
        scene.validate()?;
        let real = to_real_scale(log, &scene);
        write_trajectory(&dir.join(format!("{name}_real.csv")), &real)?;
        save_pointcloud(&dir.join(format!("{name}_real_final.xyz")), real.current())?;
    }
    Ok(())
}

fn summary(log: &TrajectoryLog) -> String {
    let (traj, fin) = crate::metrics::collision_rates(log, log.meta.kappa);
    format!(
        "{} agents, {} steps, TRAJ {traj:.3}% FIN {fin:.3}%",
        log.agents(),
        log.steps()
    )
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::MakeData {
            common,
            shape,
            points,
            count,
        } => {
            let kind: ShapeKind = shape.parse()?;
            let data = make_synthetic_dataset(kind, points, count, common.seed.unwrap_or(0))?;
            create_dir(&common.out)?;
            for (i, cloud) in data.iter().enumerate() {
                save_pointcloud(&common.out.join(format!("{shape}_{i:03}.xyz")), cloud)?;
            }
            println!("wrote {count} {shape} cloud(s) of {points} points to {}", common.out.display());
        }
        Command::Train {
            common,
            data,
            steps,
            diffusion,
        } => {
            let mut cfg = load_config(&common.config)?;
            if let Some(s) = common.seed {
                cfg.train.seed = s;
            }
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            let mut clouds = Vec::new();
            for f in xyz_files(&data)? {
                let (x, _) = normalize(&load_pointcloud(&f)?)?;
                clouds.push(from_points(&x));
            }
            let mut log = String::new();
            let every = (cfg.train.steps / 20).max(1);
            let on_step = |r: &StepRecord| {
                log.push_str(&format!("{r}\n"));
                if r.step % every == 0 || r.step + 1 == cfg.train.steps {
                    eprintln!("{r}");
                }
            };
            let ckpt = if diffusion {
                train_ddpm(&clouds, &cfg.train, on_step)?
            } else {
                train_with(&clouds, &cfg.train, &Cfm, on_step)?
            };
            create_dir(&common.out)?;
            ckpt.save(&common.out.join("model.ckpt"))?;
            write_text(&common.out.join("train.log"), &log)?;
            println!("final loss {:.6}; checkpoint at {}", ckpt.final_loss, common.out.join("model.ckpt").display());
        }
        Command::Sample {
            common,
            checkpoint,
            steps,
            agents,
            no_orca,
            scale,
        } => {
            let mut cfg = load_config(&common.config)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            if let Some(s) = steps {
                cfg.sample.steps = s;
            }
            if let Some(a) = agents {
                cfg.sample.agents = a;
            }
            if no_orca {
                cfg.sample.use_orca = false;
            }
            let sc = sample_config(&cfg.sample, ckpt.config.kappa, ckpt.config.horizon, common.seed.unwrap_or(0));
            let log = sample(&ckpt, &sc)?;
            write_log(&common.out, "trajectory", &log, scene_for(&cfg.scene, scale))?;
            println!("{}", summary(&log));
        }
        Command::SampleDiffusion {
            common,
            checkpoint,
            agents,
            scale,
        } => {
            let cfg = load_config(&common.config)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let log = ddpm_sample(&ckpt, agents.unwrap_or(cfg.sample.agents), common.seed.unwrap_or(0))?;
            write_log(&common.out, "trajectory", &log, scene_for(&cfg.scene, scale))?;
            println!("{}", summary(&log));
        }
        Command::SampleCfmOrca {
            common,
            checkpoint,
            steps,
            agents,
            scale,
        } => {
            let mut cfg = load_config(&common.config)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            if let Some(s) = steps {
                cfg.sample.steps = s;
            }
            if let Some(a) = agents {
                cfg.sample.agents = a;
            }
            let sc = sample_config(&cfg.sample, ckpt.config.kappa, ckpt.config.horizon, common.seed.unwrap_or(0));
            let log = sample_cfm_then_orca(&ckpt, &sc)?;
            write_log(&common.out, "trajectory", &log, scene_for(&cfg.scene, scale))?;
            println!("{}", summary(&log));
        }
        Command::Evaluate {
            common,
            trajectory,
            reference,
            scale,
        } => {
            let cfg = load_config(&common.config)?;
            let scene = scene_for(&cfg.scene, scale);
            let mut logs = Vec::new();
            for p in &trajectory {
                let log = read_trajectory(p)?;
                logs.push(match scene {
                    Some(s) if log.meta.length_scale == 1.0 => to_real_scale(&log, &s),
                    _ => log,
                });
            }
            let refs: Vec<Vec<DVec3>> = if reference.is_empty() {
                Vec::new()
            } else {
                let f = scene.map_or(1.0, |s| s.factor());
                xyz_files(&reference)?
                    .iter()
                    .map(|p| load_pointcloud(p).map(|c| c.into_iter().map(|x| x * f).collect()))
                    .collect::<Result<_>>()?
            };
            let report = MetricsReport::evaluate(&logs, (!refs.is_empty()).then_some(refs.as_slice()))?;
            print!("{report}");
            create_dir(&common.out)?;
            write_text(&common.out.join("metrics.txt"), &report.to_key_values())?;
        }
        Command::Export {
            common,
            trajectory,
            scale,
        } => {
            let cfg = load_config(&common.config)?;
            let mut log = read_trajectory(&trajectory)?;
            if let Some(s) = scene_for(&cfg.scene, scale) {
                log = to_real_scale(&log, &s);
            }
            create_dir(&common.out)?;
            for (k, frame) in log.positions.iter().enumerate() {
                save_pointcloud(&common.out.join(format!("frame_{k:04}.xyz")), frame)?;
            }
            println!("wrote {} frames to {}", log.positions.len(), common.out.display());
        }
    }
    Ok(())
}
