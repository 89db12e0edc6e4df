use rand::Rng;

use super::params::{Bound, Linear, ParamStore};
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// PointNet-style encoder `q(z | X)`: a shared per-point MLP, a column-wise
/// max over points, and two linear heads for the mean and log-variance.
///
/// The max reduction makes the output exactly invariant to point order.
#[derive(Debug, Clone)]
pub struct PointSetEncoder {
    layers: Vec<Linear>,
    mean_head: Linear,
    logvar_head: Linear,
    latent_dim: usize,
}

/// Graph handles produced by [`PointSetEncoder::encode`].
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub z: Var,
    pub mean: Var,
    pub logvar: Var,
}

impl PointSetEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        widths: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Self {
        assert!(!widths.is_empty());
        let mut fan_in = 3;
        let layers = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let l = Linear::new(store, &format!("{prefix}.mlp{i}"), fan_in, w, rng);
                fan_in = w;
                l
            })
            .collect();
        let mean_head = Linear::new(store, &format!("{prefix}.mean"), fan_in, latent_dim, rng);
        let logvar_head = Linear::new(store, &format!("{prefix}.logvar"), fan_in, latent_dim, rng);
        Self {
            layers,
            mean_head,
            logvar_head,
            latent_dim,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Pooled global feature `[1, width]`. ReLU follows every per-point layer
    /// except the last.
    fn pooled(&self, g: &Graph, p: &Bound, x: Var) -> Result<Var> {
        if g.shape(x).first().copied().unwrap_or(0) == 0 {
            return Err(Error::EmptyCloud);
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, p, h)?;
            if i + 1 < self.layers.len() {
                h = g.relu(h)?;
            }
        }
        Ok(g.max_rows(h)?)
    }

    /// `(mean, logvar)`, each `[1, d]`.
    pub fn moments(&self, g: &Graph, p: &Bound, x: Var) -> Result<(Var, Var)> {
        let pooled = self.pooled(g, p, x)?;
        Ok((
            self.mean_head.forward(g, p, pooled)?,
            self.logvar_head.forward(g, p, pooled)?,
        ))
    }

    /// Reparameterized draw `z = mean + exp(logvar / 2) ⊙ noise` with
    /// caller-supplied standard-normal `noise: [1, d]`.
    pub fn encode(&self, g: &Graph, p: &Bound, x: Var, noise: Var) -> Result<Encoded> {
        let got = g.shape(noise).iter().product();
        if got != self.latent_dim {
            return Err(Error::LatentDim {
                expected: self.latent_dim,
                got,
            });
        }
        let (mean, logvar) = self.moments(g, p, x)?;
        let std = g.exp(g.scale(logvar, 0.5)?)?;
        let z = g.add(mean, g.mul(std, noise)?)?;
        Ok(Encoded { z, mean, logvar })
    }
}
