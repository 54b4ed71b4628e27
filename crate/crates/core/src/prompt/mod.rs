//! Prompt templates: parsing and rendering with explicit position ids,
//! [MASK]-based sentence representations, template bias and denoising,
//! greedy template search and continuous templates.

mod continuous;
mod encode;
mod search;
mod template;

pub use continuous::{train_continuous_template, ContinuousConfig};
pub(crate) use encode::mask_states;
pub use encode::{
    denoise, encode_mask, encode_prompts, encode_topk, template_bias, top_k_ids, topk_average, PromptEncoder,
    Representation, DEFAULT_TOP_K,
};
pub use search::{greedy_template_search, relationship_template, wrap_template, SearchOutcome, SearchStage, SearchStep};
pub use template::{parse_template, Piece, PromptEncoding, Template, TemplateSource, MASK_SLOT, SENTENCE_SLOT, TPL1_MAGIC};

/// Default templates for continuation-marked (BERT-style) vocabularies.
pub const DEFAULT_TEMPLATES: [&str; 2] =
    ["This sentence of \"[X]\" means [MASK] .", "This sentence : \"[X]\" means [MASK] ."];

/// Default templates for begin-marked (RoBERTa-style) vocabularies.
pub const DEFAULT_TEMPLATES_BEGIN_MARKED: [&str; 2] =
    ["This sentence of '[X]' means [MASK] .", "This sentence : '[X]' means [MASK] ."];
