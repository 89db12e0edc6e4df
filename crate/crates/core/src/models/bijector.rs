use rand::Rng;

use super::params::{Bound, Linear, ParamId, ParamStore};
use crate::autodiff::{AutodiffError, Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Coupling {
    /// 1 on the dimensions that condition the layer and pass through unchanged.
    mask: Tensor,
    scale_in: Linear,
    scale_out: Linear,
    shift_in: Linear,
    shift_out: Linear,
    scale_factor: ParamId,
}

/// Stack of affine coupling layers `F: w ↦ z`.
///
/// Layer `k` keeps the dimensions of parity `k mod 2` fixed and updates the
/// others as `z = w ⊙ exp(s) + shift`, with `s = a ⊙ tanh(net_s(masked w))`
/// for a learned per-dimension factor `a`. The log-determinant of the layer is
/// the sum of `s` over the updated dimensions.
#[derive(Debug, Clone)]
pub struct CouplingBijector {
    layers: Vec<Coupling>,
    dim: usize,
}

/// How the output layers of the scale and shift networks start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingInit {
    /// Zero output layers: the bijector starts as the identity.
    Identity,
    /// Glorot everywhere: a generic non-trivial map, used by tests.
    Random,
}

impl CouplingBijector {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        hidden: usize,
        num_layers: usize,
        init: CouplingInit,
        rng: &mut R,
    ) -> Self {
        assert!(dim >= 2, "coupling needs at least two dimensions");
        let layers = (0..num_layers)
            .map(|k| {
                let name = format!("{prefix}.layer{k}");
                let mask = Tensor::from_fn(&[1, dim], |j| if j % 2 == k % 2 { 1.0 } else { 0.0 });
                let out = |store: &mut ParamStore, n: &str, rng: &mut R| match init {
                    CouplingInit::Identity => Linear::zeroed(store, n, hidden, dim),
                    CouplingInit::Random => Linear::new(store, n, hidden, dim, rng),
                };
                let scale_in = Linear::new(store, &format!("{name}.scale_in"), dim, hidden, rng);
                let scale_out = out(store, &format!("{name}.scale_out"), rng);
                let shift_in = Linear::new(store, &format!("{name}.shift_in"), dim, hidden, rng);
                let shift_out = out(store, &format!("{name}.shift_out"), rng);
                let scale_factor = store.register(format!("{name}.scale_factor"), Tensor::full(&[1, dim], 1.0));
                Coupling {
                    mask,
                    scale_in,
                    scale_out,
                    shift_in,
                    shift_out,
                    scale_factor,
                }
            })
            .collect();
        Self { layers, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn check_dim(&self, g: &Graph, v: Var) -> Result<()> {
        let got: usize = g.shape(v).iter().product();
        if got != self.dim {
            return Err(Error::LatentDim {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// `(s, shift)` for one layer, both zero on the fixed dimensions.
    fn scale_shift(&self, layer: &Coupling, g: &Graph, p: &Bound, input: Var) -> Result<(Var, Var), AutodiffError> {
        let lin = |l: &Linear, x: Var| -> Result<Var, AutodiffError> {
            let h = g.matmul(x, p.var(l.w))?;
            g.add(h, p.var(l.b))
        };
        let mask = g.constant(layer.mask.clone())?;
        let free = g.constant(layer.mask.map(|m| 1.0 - m))?;
        let kept = g.mul(input, mask)?;
        let s = g.tanh(lin(&layer.scale_out, g.tanh(lin(&layer.scale_in, kept)?)?)?)?;
        let s = g.mul(g.mul(s, p.var(layer.scale_factor))?, free)?;
        let shift = lin(&layer.shift_out, g.tanh(lin(&layer.shift_in, kept)?)?)?;
        let shift = g.mul(shift, free)?;
        Ok((s, shift))
    }

    /// `z = F(w)` and `log |det ∂F/∂w|`, for `w: [1, d]`.
    pub fn forward(&self, g: &Graph, p: &Bound, w: Var) -> Result<(Var, Var)> {
        self.check_dim(g, w)?;
        let mut x = w;
        let mut logdet = g.constant(Tensor::scalar(0.0))?;
        for (k, layer) in self.layers.iter().enumerate() {
            let step = || -> Result<(Var, Var), AutodiffError> {
                let (s, shift) = self.scale_shift(layer, g, p, x)?;
                let y = g.add(g.mul(x, g.exp(s)?)?, shift)?;
                Ok((y, g.add(logdet, g.sum(s)?)?))
            };
            (x, logdet) = step().map_err(|source| Error::Bijector { layer: k, source })?;
        }
        Ok((x, logdet))
    }

    /// `w = F⁻¹(z)` and `log |det ∂F⁻¹/∂z|`, for `z: [1, d]`.
    pub fn inverse(&self, g: &Graph, p: &Bound, z: Var) -> Result<(Var, Var)> {
        self.check_dim(g, z)?;
        let mut x = z;
        let mut logdet = g.constant(Tensor::scalar(0.0))?;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let step = || -> Result<(Var, Var), AutodiffError> {
                let (s, shift) = self.scale_shift(layer, g, p, x)?;
                let neg = g.scale(s, -1.0)?;
                let y = g.mul(g.sub(x, shift)?, g.exp(neg)?)?;
                Ok((y, g.sub(logdet, g.sum(s)?)?))
            };
            (x, logdet) = step().map_err(|source| Error::Bijector { layer: k, source })?;
        }
        Ok((x, logdet))
    }
}
