//! Denoising-diffusion baseline sharing the flow model's networks.
//!
//! The field network predicts the added noise `ε` from `(x_t, t / T, z)`.
//! Sampling is ancestral with variance `β_t` and logs every intermediate
//! cloud as a trajectory frame.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::flowmatch::{field_error, train_with, LossParts, Objective, StepRecord, TrainConfig};
use crate::io::checkpoint::{Algorithm, Checkpoint};
use crate::io::{from_points, to_points};
use crate::models::{standard_normal, Bound, SwarmModel};
use crate::sampling::{initial_state, TrajectoryLog, TrajectoryMeta};

/// Linear `β` schedule over `steps` noising steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("diffusion needs at least one step".into()));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        Self::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::DiffusionStep { t, steps: self.steps() });
        }
        Ok(())
    }

    /// `β_t` for `1 <= t <= steps`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `ᾱ_t = Π_{s<=t} (1 - β_s)`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Closed-form marginal `√ᾱ_t x0 + √(1 - ᾱ_t) ε`.
    pub fn forward_sample(&self, x0: &Tensor, t: usize, noise: &Tensor) -> Result<Tensor> {
        self.check(t)?;
        let ab = self.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.zip_map(noise, |x, e| a * x + b * e))
    }

    /// Mean of `p(x_{t-1} | x_t)` given the predicted noise.
    pub fn posterior_mean(&self, x: &Tensor, eps: &Tensor, t: usize) -> Result<Tensor> {
        if t == 0 {
            return Err(Error::DiffusionStep { t, steps: self.steps() });
        }
        self.check(t)?;
        let beta = self.beta(t);
        let c = beta / (1.0 - self.alpha_bar(t)).sqrt();
        let inv = 1.0 / (1.0 - beta).sqrt();
        Ok(x.zip_map(eps, |x, e| inv * (x - c * e)))
    }
}

/// Random inputs of one diffusion loss evaluation.
#[derive(Debug, Clone)]
pub struct DdpmDraws {
    pub t: usize,
    pub noise: Tensor,
    pub latent_noise: Tensor,
}

impl DdpmDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, points: usize, latent_dim: usize, steps: usize) -> Self {
        let t = rng.random_range(1..=steps);
        let latent_noise = standard_normal(rng, &[1, latent_dim]);
        let noise = standard_normal(rng, &[points, 3]);
        Self { t, noise, latent_noise }
    }
}

/// Mean over points of `‖ε - ε_θ(x_t, t, z)‖²`, plus the same KL term as
/// the flow objective.
pub fn ddpm_train_loss(
    model: &SwarmModel,
    schedule: &DiffusionSchedule,
    g: &Graph,
    p: &Bound,
    x0: &Tensor,
    draws: &DdpmDraws,
) -> Result<LossParts> {
    if x0.dims2().map_or(0, |d| d.0) == 0 {
        return Err(Error::EmptyCloud);
    }
    let lnoise = g.constant(draws.latent_noise.clone())?;
    let enc = model.encoder.encode(g, p, g.constant(x0.clone())?, lnoise)?;
    let xt = g.constant(schedule.forward_sample(x0, draws.t, &draws.noise)?)?;
    let t_unit = draws.t as f64 / schedule.steps() as f64;
    let pred = model.field.forward(g, p, xt, t_unit, enc.z)?;
    let field = field_error(g, pred, g.constant(draws.noise.clone())?)?;
    let kl = model.kl_term(g, p, &enc, lnoise)?;
    Ok(LossParts {
        total: g.add(field, kl)?,
        field,
        kl,
    })
}

/// The noise-prediction objective.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ddpm;

impl Objective for Ddpm {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ddpm
    }

    fn loss(
        &self,
        model: &SwarmModel,
        config: &TrainConfig,
        g: &Graph,
        p: &Bound,
        x0: &Tensor,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossParts> {
        let schedule = DiffusionSchedule::from_config(config)?;
        let points = x0.dims2().map_or(0, |d| d.0);
        let draws = DdpmDraws::sample(rng, points, model.latent_dim(), schedule.steps());
        ddpm_train_loss(model, &schedule, g, p, x0, &draws)
    }
}

pub fn train_ddpm(dataset: &[Tensor], config: &TrainConfig, on_step: impl FnMut(&StepRecord)) -> Result<Checkpoint> {
    DiffusionSchedule::from_config(config)?;
    train_with(dataset, config, &Ddpm, on_step)
}

/// Ancestral sampling from `start` under latent `z`, one frame per
/// denoising step over a total duration `horizon`. `rng = None` removes the
/// injected noise.
pub fn ddpm_integrate(
    model: &SwarmModel,
    schedule: &DiffusionSchedule,
    z: &Tensor,
    start: Vec<DVec3>,
    horizon: f64,
    mut rng: Option<&mut ChaCha8Rng>,
    seed: u64,
) -> Result<TrajectoryLog> {
    let steps = schedule.steps();
    let agents = start.len();
    let mut log = TrajectoryLog::start(
        start,
        horizon,
        steps,
        TrajectoryMeta {
            algorithm: "ddpm".into(),
            seed,
            kappa: 0.0,
            length_scale: 1.0,
        },
    );
    for (k, t) in (1..=steps).rev().enumerate() {
        let x = from_points(log.current());
        let eps = model.vector_field(&x, t as f64 / steps as f64, z)?;
        let mut next = schedule.posterior_mean(&x, &eps, t)?;
        if t > 1 {
            if let Some(rng) = rng.as_deref_mut() {
                let s = schedule.beta(t).sqrt();
                let xi = standard_normal(rng, &[agents, 3]);
                next = next.zip_map(&xi, |m, e| m + s * e);
            }
        }
        let dt = log.dt;
        let v: Vec<DVec3> = to_points(&next)
            .iter()
            .zip(log.current())
            .map(|(n, c)| (*n - *c) / dt)
            .collect();
        debug_assert_eq!(log.times[k + 1], horizon * (t - 1) as f64 / steps as f64);
        log.push(v.clone(), v);
    }
    Ok(log)
}

/// Generate one trajectory from a diffusion checkpoint.
pub fn ddpm_sample(ckpt: &Checkpoint, agents: usize, seed: u64) -> Result<TrajectoryLog> {
    if ckpt.algorithm != Algorithm::Ddpm {
        return Err(Error::Config(format!(
            "diffusion sampling needs a diffusion checkpoint, got `{}`",
            ckpt.algorithm.name()
        )));
    }
    if agents == 0 {
        return Err(Error::Config("agent count must be at least 1".into()));
    }
    let schedule = DiffusionSchedule::from_config(&ckpt.config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (z, x) = initial_state(&ckpt.model, agents, &mut rng)?;
    let mut log = ddpm_integrate(&ckpt.model, &schedule, &z, x, ckpt.config.horizon, Some(&mut rng), seed)?;
    log.meta.kappa = ckpt.config.kappa;
    Ok(log)
}
