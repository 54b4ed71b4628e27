//! Static token embedding analysis: the EMB1 interchange format, anisotropy,
//! bias filtering, static-average sentence encoding and 2-D PCA views.

mod analysis;
mod filter;
mod matrix;
mod pca;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use analysis::{
    frequency_bias_score, mean_pairwise_cosine, sentence_anisotropy, static_avg_encode, token_anisotropy,
    StaticAvgEncoder,
};
pub use filter::{resolve_filter, BiasFilterSpec, CaseMode, RemovedTokens};
pub use matrix::{EmbeddingMatrix, EMB1_MAGIC};
pub use pca::{pca_2d, pca_2d_dense, Pca2d};

/// Maps sentences to fixed-size vectors.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;

    fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>>;

    fn encode(&self, sentence: &str) -> Result<Vec<f64>> {
        Ok(self.encode_batch(&[sentence])?.remove(0))
    }
}

/// The sentence embedding methods compared throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    StaticAvg,
    LastLayerAvg,
    FirstLastAvg,
    PromptMask,
    PromptTopK,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::StaticAvg => "static-avg",
            EncoderKind::LastLayerAvg => "last-avg",
            EncoderKind::FirstLastAvg => "first-last-avg",
            EncoderKind::PromptMask => "prompt-mask",
            EncoderKind::PromptTopK => "prompt-topk",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "static-avg" | "static" => EncoderKind::StaticAvg,
            "last-avg" | "last-layer-avg" => EncoderKind::LastLayerAvg,
            "first-last-avg" => EncoderKind::FirstLastAvg,
            "prompt-mask" | "mask" => EncoderKind::PromptMask,
            "prompt-topk" | "topk" => EncoderKind::PromptTopK,
            other => return Err(Error::invalid(format!("unknown encoder {other:?}"))),
        })
    }
}
