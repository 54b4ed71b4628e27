//! Sentence embeddings from masked-language-model encoders: static embedding
//! bias analysis, prompt-based mask-token representations, template search,
//! template denoising and contrastive training at desk scale.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod prompt;
pub mod synth;
pub mod training;

pub use error::{Error, ErrorClass, Result};
