//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "SWFLCKPT"
//! version    u32      1
//! algorithm  u8       0 = flow matching, 1 = diffusion
//! config     u32 length + UTF-8 `key = value` text
//! step       u64
//! final_loss f64
//! tensors    u32 count, then per tensor:
//!              u32 name length + UTF-8 name
//!              u32 rank, rank × u64 dims
//!              product(dims) × f64
//! adam step  u64
//! adam m, v  for each tensor in table order: product(dims) × f64 (m first, then v)
//! ```

use std::path::Path;

use super::config::{parse_entries, train_config_from_entries, train_config_to_string};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::flowmatch::{AdamState, TrainConfig};
use crate::models::SwarmModel;

const MAGIC: &[u8; 8] = b"SWFLCKPT";
const VERSION: u32 = 1;

/// Which training algorithm produced a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Cfm,
    Ddpm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cfm => "cfm",
            Algorithm::Ddpm => "ddpm",
        }
    }
}

/// Trained parameters plus everything needed to resume or sample.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub algorithm: Algorithm,
    pub config: TrainConfig,
    pub model: SwarmModel,
    pub optimizer: AdamState,
    pub step: u64,
    pub final_loss: f64,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

fn put_f64s(out: &mut Vec<u8>, data: &[f64]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.algorithm {
            Algorithm::Cfm => 0,
            Algorithm::Ddpm => 1,
        });
        put_str(&mut out, &train_config_to_string(&self.config));
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.final_loss.to_le_bytes());
        out.extend_from_slice(&(self.model.params.len() as u32).to_le_bytes());
        for (name, t) in self.model.params.iter() {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            put_f64s(&mut out, t.data());
        }
        out.extend_from_slice(&self.optimizer.step.to_le_bytes());
        for (m, v) in self.optimizer.m.iter().zip(&self.optimizer.v) {
            put_f64s(&mut out, m.data());
            put_f64s(&mut out, v.data());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let algorithm = match r.u8()? {
            0 => Algorithm::Cfm,
            1 => Algorithm::Ddpm,
            other => return Err(Error::Checkpoint(format!("unknown algorithm tag {other}"))),
        };
        let text = r.string()?;
        let echo = Path::new("<checkpoint config>");
        let config = train_config_from_entries(&parse_entries(&text, echo)?, echo)?;
        let step = r.u64()?;
        let final_loss = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));

        let mut model = SwarmModel::new(config.model.clone(), 0)?;
        let count = r.u32()? as usize;
        if count != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for this architecture, found {count}",
                model.params.len()
            )));
        }
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape.iter().product();
            let data = r.f64s(n)?;
            let slot = model
                .params
                .by_name_mut(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{name}`")))?;
            if slot.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {shape:?}, architecture expects {:?}",
                    slot.shape()
                )));
            }
            *slot = Tensor::new(shape.clone(), data)?;
            shapes.push(shape);
        }
        let mut optimizer = AdamState::new(&model.params);
        optimizer.step = r.u64()?;
        for (i, shape) in shapes.iter().enumerate() {
            let n = shape.iter().product();
            optimizer.m[i] = Tensor::new(shape.clone(), r.f64s(n)?)?;
            optimizer.v[i] = Tensor::new(shape.clone(), r.f64s(n)?)?;
        }
        if !r.buf.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            algorithm,
            config,
            model,
            optimizer,
            step,
            final_loss,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
