use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::schedule::FlowSchedule;
use crate::autodiff::{AutodiffError, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::io::checkpoint::{Algorithm, Checkpoint};
use crate::models::{standard_normal, Bound, ModelConfig, SwarmModel};

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub horizon: f64,
    pub sigma_min: f64,
    /// Minimum separation used downstream by the sampler.
    pub kappa: f64,
    /// Default sampling step size.
    pub dt: f64,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            learning_rate: 1e-3,
            steps: 2000,
            batch_size: 1,
            seed: 0,
            horizon: 1.0,
            sigma_min: 1e-4,
            kappa: 0.06,
            dt: 0.01,
            diffusion_steps: 100,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl TrainConfig {
    /// Settings for fitting one shape: an 8-dimensional latent and a larger
    /// step size. With a single training shape the latent carries no
    /// information, and a wide latent only feeds noise into the field.
    pub fn single_shape() -> Self {
        Self {
            model: ModelConfig {
                latent_dim: 8,
                ..ModelConfig::default()
            },
            learning_rate: 3e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        FlowSchedule::new(self.horizon, self.sigma_min)?;
        let positive = [
            ("learning_rate", self.learning_rate >= 0.0),
            ("batch_size", self.batch_size > 0),
            ("kappa", self.kappa > 0.0),
            ("dt", self.dt > 0.0),
            ("diffusion_steps", self.diffusion_steps > 0),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn flow_schedule(&self) -> FlowSchedule {
        FlowSchedule {
            horizon: self.horizon,
            sigma_min: self.sigma_min,
        }
    }
}

/// Constant for the first half of training, then linear down to 10% of the
/// base rate at the final step.
#[derive(Debug, Clone, Copy)]
pub struct LinearDecay {
    pub base: f64,
    pub total_steps: usize,
}

impl LinearDecay {
    pub fn rate(&self, step: usize) -> f64 {
        let half = self.total_steps / 2;
        if step < half || self.total_steps <= 1 {
            return self.base;
        }
        let span = (self.total_steps - 1 - half).max(1) as f64;
        let frac = ((step - half) as f64 / span).min(1.0);
        self.base * (1.0 - 0.9 * frac)
    }
}

/// Loss and its two components, as nodes on the step's graph.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub field: Var,
    pub kl: Var,
}

/// Training objective over one cloud; draws its own randomness from `rng`.
pub trait Objective {
    fn algorithm(&self) -> Algorithm;

    fn loss(
        &self,
        model: &SwarmModel,
        config: &TrainConfig,
        g: &Graph,
        p: &Bound,
        x0: &Tensor,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossParts>;
}

/// Random inputs of one conditional-flow-matching loss evaluation.
#[derive(Debug, Clone)]
pub struct CfmDraws {
    pub t: f64,
    pub noise: Tensor,
    pub latent_noise: Tensor,
}

impl CfmDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, points: usize, latent_dim: usize, horizon: f64) -> Self {
        let t = rng.random_range(0.0..horizon);
        let latent_noise = standard_normal(rng, &[1, latent_dim]);
        let noise = standard_normal(rng, &[points, 3]);
        Self {
            t,
            noise,
            latent_noise,
        }
    }
}

/// Mean over points of `‖v* - v(x_t, t, z)‖²`, plus the KL term.
pub fn cfm_loss(
    model: &SwarmModel,
    schedule: &FlowSchedule,
    g: &Graph,
    p: &Bound,
    x0: &Tensor,
    draws: &CfmDraws,
) -> Result<LossParts> {
    let points = x0.dims2().map(|d| d.0).unwrap_or(0);
    if points == 0 {
        return Err(Error::EmptyCloud);
    }
    let x0v = g.constant(x0.clone())?;
    let lnoise = g.constant(draws.latent_noise.clone())?;
    let enc = model.encoder.encode(g, p, x0v, lnoise)?;
    let xt = schedule.sample_path_point(x0, draws.t, &draws.noise)?;
    let target = g.constant(schedule.target_field(x0, &draws.noise))?;
    let xt = g.constant(xt)?;
    let pred = model
        .field
        .forward(g, p, xt, draws.t / schedule.horizon, enc.z)?;
    let field = field_error(g, pred, target)?;
    let kl = model.kl_term(g, p, &enc, lnoise)?;
    Ok(LossParts {
        total: g.add(field, kl)?,
        field,
        kl,
    })
}

/// `Σ_i ‖pred_i - target_i‖² / M` for `[M, 3]` inputs.
pub fn field_error(g: &Graph, pred: Var, target: Var) -> Result<Var, AutodiffError> {
    let rows = g.shape(pred).first().copied().unwrap_or(1).max(1);
    let diff = g.sub(pred, target)?;
    g.scale(g.sum(g.mul(diff, diff)?)?, 1.0 / rows as f64)
}

/// The conditional-flow-matching objective.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cfm;

impl Objective for Cfm {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Cfm
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
        let points = x0.dims2().map(|d| d.0).unwrap_or(0);
        let draws = CfmDraws::sample(rng, points, model.latent_dim(), config.horizon);
        cfm_loss(model, &config.flow_schedule(), g, p, x0, &draws)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub field: f64,
    pub kl: f64,
    pub lr: f64,
}

impl std::fmt::Display for StepRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} loss {:.6} field {:.6} kl {:.6} lr {:.3e}",
            self.step, self.loss, self.field, self.kl, self.lr
        )
    }
}

/// Train the flow-matching model on normalized clouds.
pub fn train(dataset: &[Tensor], config: &TrainConfig) -> Result<Checkpoint> {
    train_with(dataset, config, &Cfm, |_| {})
}

/// Training loop shared by every [`Objective`]. Deterministic given
/// `config.seed`.
pub fn train_with(
    dataset: &[Tensor],
    config: &TrainConfig,
    objective: &dyn Objective,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<Checkpoint> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SwarmModel::new(config.model.clone(), rng.random())?;
    model.field.zero_output(&mut model.params);
    let mut optimizer = AdamState::new(&model.params);
    let decay = LinearDecay {
        base: config.learning_rate,
        total_steps: config.steps,
    };
    let mut last = f64::NAN;

    for step in 0..config.steps {
        let lr = decay.rate(step);
        let g = Graph::new();
        let p = model.params.bind(&g, true)?;
        let mut step_loss = || -> Result<(Var, f64, f64)> {
            let mut totals = Vec::with_capacity(config.batch_size);
            let (mut field, mut kl) = (0.0, 0.0);
            for _ in 0..config.batch_size {
                let x0 = &dataset[rng.random_range(0..dataset.len())];
                let parts = objective.loss(&model, config, &g, &p, x0, &mut rng)?;
                field += g.item(parts.field);
                kl += g.item(parts.kl);
                totals.push(parts.total);
            }
            let n = config.batch_size as f64;
            let sum = totals[1..]
                .iter()
                .try_fold(totals[0], |acc, &t| g.add(acc, t))?;
            Ok((g.scale(sum, 1.0 / n)?, field / n, kl / n))
        };
        let (total, field, kl) = match step_loss() {
            Ok(v) => v,
            Err(Error::Autodiff(AutodiffError::NonFinite { .. })) => {
                return Err(Error::NonFiniteLoss {
                    step,
                    field: f64::NAN,
                    kl: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        let loss = g.item(total);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, field, kl });
        }
        g.backward(total)?;
        let grads: Vec<Tensor> = p.vars().iter().map(|&v| g.grad(v)).collect();
        adam_step(&mut model.params, &grads, &mut optimizer, lr);
        last = loss;
        on_step(&StepRecord {
            step,
            loss,
            field,
            kl,
            lr,
        });
    }

    Ok(Checkpoint {
        algorithm: objective.algorithm(),
        config: config.clone(),
        model,
        optimizer,
        step: config.steps as u64,
        final_loss: last,
    })
}
