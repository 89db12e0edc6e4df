//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are matched
//! exactly; unknown keys are an error so typos do not pass silently.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use super::scale::SceneScale;
use crate::flowmatch::TrainConfig;

/// One `key = value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_entries(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push(Entry {
            key: k.trim().to_string(),
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn read_entries(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_entries(&text, path)
}

fn parse_value<T: FromStr>(e: &Entry, path: &Path) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: e.line,
        msg: format!("bad value `{}` for `{}`", e.value, e.key),
    })
}

fn parse_list(e: &Entry, path: &Path) -> Result<Vec<usize>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: e.line,
                msg: format!("bad list `{}` for `{}`", e.value, e.key),
            })
        })
        .collect()
}

/// Set one training key. Returns `false` if the key is not a training key.
pub fn apply_train_entry(cfg: &mut TrainConfig, e: &Entry, path: &Path) -> Result<bool> {
    match e.key.as_str() {
        "latent_dim" => cfg.model.latent_dim = parse_value(e, path)?,
        "field_hidden" => cfg.model.field_hidden = parse_value(e, path)?,
        "field_blocks" => cfg.model.field_blocks = parse_value(e, path)?,
        "encoder_widths" => cfg.model.encoder_widths = parse_list(e, path)?,
        "bijector_hidden" => cfg.model.bijector_hidden = parse_value(e, path)?,
        "bijector_layers" => cfg.model.bijector_layers = parse_value(e, path)?,
        "learning_rate" => cfg.learning_rate = parse_value(e, path)?,
        "train_steps" => cfg.steps = parse_value(e, path)?,
        "batch_size" => cfg.batch_size = parse_value(e, path)?,
        "seed" => cfg.seed = parse_value(e, path)?,
        "horizon" => cfg.horizon = parse_value(e, path)?,
        "sigma_min" => cfg.sigma_min = parse_value(e, path)?,
        "kappa" => cfg.kappa = parse_value(e, path)?,
        "dt" => cfg.dt = parse_value(e, path)?,
        "diffusion_steps" => cfg.diffusion_steps = parse_value(e, path)?,
        "beta_start" => cfg.beta_start = parse_value(e, path)?,
        "beta_end" => cfg.beta_end = parse_value(e, path)?,
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn train_config_from_entries(entries: &[Entry], path: &Path) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for e in entries {
        if !apply_train_entry(&mut cfg, e, path)? {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: e.line,
                msg: format!("unknown key `{}`", e.key),
            });
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sampling settings that are not part of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSettings {
    pub agents: usize,
    pub steps: usize,
    pub use_orca: bool,
    /// Velocity-obstacle horizon in steps.
    pub tau_steps: f64,
    /// `None` means `4κ`.
    pub neighbor_radius: Option<f64>,
    /// `None` means twice the largest preferred speed of each step.
    pub v_max: Option<f64>,
    pub margin: f64,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            agents: 512,
            steps: 100,
            use_orca: true,
            tau_steps: 10.0,
            neighbor_radius: None,
            v_max: None,
            margin: 1e-6,
        }
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub sample: SampleSettings,
    pub scene: SceneScale,
}

impl RunConfig {
    pub fn from_entries(entries: &[Entry], path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for e in entries {
            if apply_train_entry(&mut cfg.train, e, path)? {
                continue;
            }
            let s = &mut cfg.sample;
            match e.key.as_str() {
                "agents" => s.agents = parse_value(e, path)?,
                "sample_steps" => s.steps = parse_value(e, path)?,
                "use_orca" => s.use_orca = parse_value(e, path)?,
                "tau_steps" => s.tau_steps = parse_value(e, path)?,
                "neighbor_radius" => s.neighbor_radius = Some(parse_value(e, path)?),
                "v_max" => s.v_max = Some(parse_value(e, path)?),
                "margin" => s.margin = parse_value(e, path)?,
                "scene_side" => cfg.scene.side = parse_value(e, path)?,
                "kappa_real" => cfg.scene.kappa_real = parse_value(e, path)?,
                "training_extent" => cfg.scene.training_extent = parse_value(e, path)?,
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: e.line,
                        msg: format!("unknown key `{}`", e.key),
                    })
                }
            }
        }
        cfg.train.validate()?;
        cfg.scene.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_entries(&read_entries(path)?, path)
    }
}

/// Serialize every training key. Floats use the shortest round-trip form.
pub fn train_config_to_string(cfg: &TrainConfig) -> String {
    let widths: Vec<String> = cfg.model.encoder_widths.iter().map(|w| w.to_string()).collect();
    let lines = [
        ("latent_dim", cfg.model.latent_dim.to_string()),
        ("field_hidden", cfg.model.field_hidden.to_string()),
        ("field_blocks", cfg.model.field_blocks.to_string()),
        ("encoder_widths", widths.join(",")),
        ("bijector_hidden", cfg.model.bijector_hidden.to_string()),
        ("bijector_layers", cfg.model.bijector_layers.to_string()),
        ("learning_rate", cfg.learning_rate.to_string()),
        ("train_steps", cfg.steps.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("seed", cfg.seed.to_string()),
        ("horizon", cfg.horizon.to_string()),
        ("sigma_min", cfg.sigma_min.to_string()),
        ("kappa", cfg.kappa.to_string()),
        ("dt", cfg.dt.to_string()),
        ("diffusion_steps", cfg.diffusion_steps.to_string()),
        ("beta_start", cfg.beta_start.to_string()),
        ("beta_end", cfg.beta_end.to_string()),
    ];
    lines
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
