use rand::Rng;

use super::params::{glorot, Bound, Linear, ParamId, ParamStore};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Width of the time embedding `(t, sin 2πt, cos 2πt)`.
pub const TIME_EMBED: usize = 3;

#[derive(Debug, Clone)]
struct GatedBlock {
    linear: Linear,
    gate: ParamId,
    context: ParamId,
}

/// Per-point velocity network `v(x, t, z)`.
///
/// A stack of gated linear blocks. Each block maps the point features `h` to
/// `h W + b + sigmoid(ctx G) ⊙ (ctx C)` where `ctx = [time embedding, z]` is
/// shared by every point of the cloud. Blocks other than the last are followed
/// by `tanh`. Points never interact, so the output for point `i` depends only
/// on `(x_i, t, z)`.
#[derive(Debug, Clone)]
pub struct GatedContextualNet {
    blocks: Vec<GatedBlock>,
    latent_dim: usize,
}

impl GatedContextualNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        latent_dim: usize,
        hidden: usize,
        num_blocks: usize,
        rng: &mut R,
    ) -> Self {
        assert!(num_blocks >= 2, "need at least an input and an output block");
        let ctx = TIME_EMBED + latent_dim;
        let blocks = (0..num_blocks)
            .map(|i| {
                let fan_in = if i == 0 { 3 } else { hidden };
                let fan_out = if i + 1 == num_blocks { 3 } else { hidden };
                let name = format!("{prefix}.block{i}");
                GatedBlock {
                    linear: Linear::new(store, &name, fan_in, fan_out, rng),
                    gate: store.register(format!("{name}.gate"), glorot(rng, ctx, fan_out)),
                    context: store.register(format!("{name}.ctx"), Tensor::zeros(&[ctx, fan_out])),
                }
            })
            .collect();
        Self { blocks, latent_dim }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Zero every parameter of the last block, making the field identically zero.
    pub fn zero_output(&self, store: &mut ParamStore) {
        let last = self.blocks.last().expect("non-empty");
        for id in [last.linear.w, last.linear.b, last.gate, last.context] {
            let t = store.get_mut(id);
            *t = Tensor::zeros(t.shape());
        }
    }

    /// Context row `[t/T, sin 2π t/T, cos 2π t/T, z]`.
    pub fn context(&self, g: &Graph, t_unit: f64, z: Var) -> Result<Var> {
        let zs = g.shape(z);
        if zs.last().copied() != Some(self.latent_dim) || zs.iter().product::<usize>() != self.latent_dim {
            return Err(Error::LatentDim {
                expected: self.latent_dim,
                got: zs.iter().product(),
            });
        }
        let angle = 2.0 * std::f64::consts::PI * t_unit;
        let te = g.constant(Tensor::row(vec![t_unit, angle.sin(), angle.cos()]))?;
        Ok(g.concat_cols(&[te, z])?)
    }

    /// Velocities `[M, 3]` for points `x: [M, 3]` at normalized time
    /// `t_unit ∈ [0, 1]` and latent `z: [1, d]`.
    pub fn forward(&self, g: &Graph, p: &Bound, x: Var, t_unit: f64, z: Var) -> Result<Var> {
        let ctx = self.context(g, t_unit, z)?;
        let mut h = x;
        for (i, block) in self.blocks.iter().enumerate() {
            let lin = block.linear.forward(g, p, h)?;
            let gate = g.sigmoid(g.matmul(ctx, p.var(block.gate))?)?;
            let shift = g.mul(gate, g.matmul(ctx, p.var(block.context))?)?;
            h = g.add(lin, shift)?;
            if i + 1 < self.blocks.len() {
                h = g.tanh(h)?;
            }
        }
        Ok(h)
    }
}
