//! MLM1 checkpoints: the magic, the config block (u32 layers, heads,
//! hidden_dim, ff_dim, max_positions, vocab_size; f64 dropout_p; u8
//! tie_mlm_head; u64 seed, all little-endian), then every tensor in
//! [`super::Layout`] order as row-major f32.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::tape::Mat;
use super::{shapes, ModelConfig, ModelParams};

pub const MLM1_MAGIC: &[u8; 4] = b"MLM1";

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(format!("checkpoint truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }
}

impl ModelParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = MLM1_MAGIC.to_vec();
        for v in [c.layers, c.heads, c.hidden_dim, c.ff_dim, c.max_positions, c.vocab_size] {
            out.extend((v as u32).to_le_bytes());
        }
        out.extend(c.dropout_p.to_le_bytes());
        out.push(c.tie_mlm_head as u8);
        out.extend(c.seed.to_le_bytes());
        for t in &self.tensors {
            for &v in t.iter() {
                out.extend((v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MLM1_MAGIC {
            return Err(Error::format("missing MLM1 magic"));
        }
        let config = ModelConfig {
            layers: r.u32()?,
            heads: r.u32()?,
            hidden_dim: r.u32()?,
            ff_dim: r.u32()?,
            max_positions: r.u32()?,
            vocab_size: r.u32()?,
            dropout_p: f64::from_le_bytes(r.array()?),
            tie_mlm_head: match r.array::<1>()?[0] {
                0 => false,
                1 => true,
                other => return Err(Error::format(format!("bad tie flag {other}"))),
            },
            seed: u64::from_le_bytes(r.array()?),
        };
        config.validate().map_err(|e| Error::format(format!("bad config block: {e}")))?;
        let mut tensors = Vec::new();
        for shape in shapes(&config) {
            let raw = r.take(shape.0 * shape.1 * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")) as f64)
                .collect::<Vec<_>>();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::format("non-finite parameter in checkpoint"));
            }
            tensors.push(Mat::from_shape_vec(shape, values).expect("shape matches length"));
        }
        if r.at != bytes.len() {
            return Err(Error::format(format!("{} trailing bytes after checkpoint", bytes.len() - r.at)));
        }
        Self::from_tensors(config, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Rounds every parameter through f32, the checkpoint precision.
    pub fn quantized(&self) -> Self {
        let tensors = self.tensors.iter().map(|t| t.mapv(|v| v as f32 as f64)).collect();
        Self { config: self.config.clone(), tensors }
    }
}
