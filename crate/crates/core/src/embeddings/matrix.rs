use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

/// A V×d static token embedding table together with its vocabulary.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    rows: Array2<f32>,
    vocab: Vocabulary,
}

impl EmbeddingMatrix {
    pub fn new(rows: Array2<f32>, vocab: Vocabulary) -> Result<Self> {
        if rows.nrows() != vocab.len() {
            return Err(Error::DimensionMismatch { expected: vocab.len(), found: rows.nrows() });
        }
        if rows.ncols() == 0 {
            return Err(Error::format("embedding dimension is zero"));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(format!("non-finite entry in row {}", pos / rows.ncols())));
        }
        let pad = vocab.specials().pad as usize;
        for (i, row) in rows.rows().into_iter().enumerate() {
            if i != pad && row.iter().all(|&v| v == 0.0) {
                return Err(Error::format(format!("row {i} ({:?}) is all zero", vocab.surface(i as u32))));
            }
        }
        Ok(Self { rows, vocab })
    }

    pub fn rows(&self) -> &Array2<f32> {
        &self.rows
    }

    pub fn row(&self, id: u32) -> ArrayView1<'_, f32> {
        self.rows.row(id as usize)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn row_f64(&self, id: u32) -> Vec<f64> {
        self.row(id).iter().map(|&v| v as f64).collect()
    }

    /// Serializes to the EMB1 interchange layout: magic, u32 V, u32 d,
    /// V·d little-endian f32 in row-major order, then the vocabulary TSV.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.rows.len());
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for v in self.rows.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        self.vocab.write_tsv(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != EMB1_MAGIC {
            return Err(Error::format("not an EMB1 file"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (v, d) = (word(4), word(8));
        let body_end = v
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(12))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::format(format!("EMB1 header claims {v}x{d} but the file is truncated")))?;
        let values: Vec<f32> = bytes[12..body_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let rows = Array2::from_shape_vec((v, d), values).expect("shape checked above");
        let vocab = Vocabulary::read_tsv(&bytes[body_end..])?;
        Self::new(rows, vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
