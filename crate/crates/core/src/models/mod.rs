//! The three trainable networks: the velocity field, the point-set encoder
//! and the coupling-layer prior over shape latents.

mod bijector;
mod encoder;
mod field;
mod params;

pub use bijector::{CouplingBijector, CouplingInit};
pub use encoder::{Encoded, PointSetEncoder};
pub use field::{GatedContextualNet, TIME_EMBED};
pub use params::{Bound, Linear, ParamId, ParamStore};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Architecture hyperparameters shared by all three networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub field_hidden: usize,
    pub field_blocks: usize,
    pub encoder_widths: Vec<usize>,
    pub bijector_hidden: usize,
    pub bijector_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 256,
            field_hidden: 128,
            field_blocks: 6,
            encoder_widths: vec![64, 128, 256],
            bijector_hidden: 128,
            bijector_layers: 14,
        }
    }
}

impl ModelConfig {
    /// Tiny widths for gradient checks and fast tests.
    pub fn tiny(latent_dim: usize) -> Self {
        Self {
            latent_dim,
            field_hidden: 16,
            field_blocks: 6,
            encoder_widths: vec![8, 16, 16],
            bijector_hidden: 8,
            bijector_layers: 14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(Error::Config("latent_dim must be at least 2".into()));
        }
        if self.field_blocks < 2 || self.field_hidden == 0 {
            return Err(Error::Config("field needs >= 2 blocks and a positive width".into()));
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return Err(Error::Config("encoder widths must be non-empty and positive".into()));
        }
        if self.bijector_hidden == 0 {
            return Err(Error::Config("bijector_hidden must be positive".into()));
        }
        Ok(())
    }
}

/// Velocity field, encoder and bijector over one shared [`ParamStore`].
#[derive(Debug, Clone)]
pub struct SwarmModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub field: GatedContextualNet,
    pub encoder: PointSetEncoder,
    pub bijector: CouplingBijector,
}

impl SwarmModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_init(config, seed, CouplingInit::Identity)
    }

    pub fn with_init(config: ModelConfig, seed: u64, init: CouplingInit) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d = config.latent_dim;
        let field = GatedContextualNet::new(&mut params, "field", d, config.field_hidden, config.field_blocks, &mut rng);
        let encoder = PointSetEncoder::new(&mut params, "encoder", &config.encoder_widths, d, &mut rng);
        let bijector = CouplingBijector::new(
            &mut params,
            "bijector",
            d,
            config.bijector_hidden,
            config.bijector_layers,
            init,
            &mut rng,
        );
        Ok(Self {
            config,
            params,
            field,
            encoder,
            bijector,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Single-sample Monte-Carlo estimate of `KL(q(z|X) || prior)`, where the
    /// prior density is a standard normal pushed through the bijector:
    /// `log q(z|X) - log N(F⁻¹(z); 0, I) - log|det ∂F⁻¹/∂z|`.
    ///
    /// `noise` must be the standard-normal draw that produced `enc.z`.
    pub fn kl_term(&self, g: &Graph, p: &Bound, enc: &Encoded, noise: Var) -> Result<Var> {
        // log q(z|X) = -1/2 Σ (ln 2π + logvar + noise²)
        let nsq = g.sum(g.mul(noise, noise)?)?;
        let log_q = g.scale(g.add(g.sum(enc.logvar)?, nsq)?, -0.5)?;
        let (w, logdet_inv) = self.bijector.inverse(g, p, enc.z)?;
        let log_prior = g.add(g.scale(g.sum(g.mul(w, w)?)?, -0.5)?, logdet_inv)?;
        // the ln 2π terms of the two densities cancel
        Ok(g.sub(log_q, log_prior)?)
    }

    /// Velocities for a whole cloud, without gradients.
    pub fn vector_field(&self, x: &Tensor, t_unit: f64, z: &Tensor) -> Result<Tensor> {
        let g = Graph::new();
        let p = self.params.bind(&g, false)?;
        let xv = g.constant(x.clone())?;
        let zv = g.constant(z.clone())?;
        let v = self.field.forward(&g, &p, xv, t_unit, zv)?;
        Ok(g.value(v))
    }

    /// `(z, mean, logvar)` for a cloud, drawing the reparameterization noise from `rng`.
    pub fn encode<R: Rng + ?Sized>(&self, x: &Tensor, rng: &mut R) -> Result<(Tensor, Tensor, Tensor)> {
        let noise = standard_normal(rng, &[1, self.latent_dim()]);
        self.encode_with_noise(x, &noise)
    }

    pub fn encode_with_noise(&self, x: &Tensor, noise: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let g = Graph::new();
        let p = self.params.bind(&g, false)?;
        let xv = g.constant(x.clone())?;
        let nv = g.constant(noise.clone())?;
        let enc = self.encoder.encode(&g, &p, xv, nv)?;
        Ok((g.value(enc.z), g.value(enc.mean), g.value(enc.logvar)))
    }

    pub fn bijector_forward(&self, w: &Tensor) -> Result<(Tensor, f64)> {
        let g = Graph::new();
        let p = self.params.bind(&g, false)?;
        let wv = g.constant(as_row(w))?;
        let (z, ld) = self.bijector.forward(&g, &p, wv)?;
        Ok((g.value(z), g.item(ld)))
    }

    pub fn bijector_inverse(&self, z: &Tensor) -> Result<(Tensor, f64)> {
        let g = Graph::new();
        let p = self.params.bind(&g, false)?;
        let zv = g.constant(as_row(z))?;
        let (w, ld) = self.bijector.inverse(&g, &p, zv)?;
        Ok((g.value(w), g.item(ld)))
    }

    /// Draw a shape latent from the learned prior: `w ~ N(0, I)`, `z = F(w)`.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Tensor> {
        let w = standard_normal(rng, &[1, self.latent_dim()]);
        Ok(self.bijector_forward(&w)?.0)
    }

    /// Monte-Carlo KL on plain tensors, mostly for diagnostics and tests.
    pub fn kl_estimate(&self, mean: &Tensor, logvar: &Tensor, noise: &Tensor) -> Result<f64> {
        let g = Graph::new();
        let p = self.params.bind(&g, false)?;
        let mean = g.constant(as_row(mean))?;
        let logvar = g.constant(as_row(logvar))?;
        let nv = g.constant(as_row(noise))?;
        let std = g.exp(g.scale(logvar, 0.5)?)?;
        let z = g.add(mean, g.mul(std, nv)?)?;
        let kl = self.kl_term(&g, &p, &Encoded { z, mean, logvar }, nv)?;
        Ok(g.item(kl))
    }
}

fn as_row(t: &Tensor) -> Tensor {
    Tensor::row(t.data().to_vec())
}

/// Tensor of i.i.d. standard-normal draws.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.sample(StandardNormal))
}

/// Closed-form `KL(N(mean, exp(logvar)) || N(0, I))`.
pub fn gaussian_kl_closed_form(mean: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}
