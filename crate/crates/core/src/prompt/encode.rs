use std::collections::BTreeMap;

use ndarray::Axis;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Vocabulary};
use crate::embeddings::SentenceEncoder;
use crate::error::{Error, Result};
use crate::model::tape::{self, Graph, Mat, Var};
use crate::model::{dropout_rng, BoundModel, Mode, ModelParams};

use super::template::Template;

pub const DEFAULT_TOP_K: usize = 200;

const CHUNK: usize = 64;

/// How the [MASK] position is turned into a sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// The last-layer hidden state at [MASK].
    Mask,
    /// Probability-weighted average of the static rows of the top-k
    /// predicted tokens.
    TopK(usize),
}

/// [MASK] hidden states (optionally minus their template bias) for a batch
/// of sentences, built in one graph. Continuous templates read their rows
/// from `extra`, or from a frozen leaf when `extra` is `None`.
pub(crate) fn mask_states(
    g: &mut Graph,
    bound: &BoundModel,
    template: &Template,
    extra: Option<Var>,
    sentences: &[&[u32]],
    denoise: bool,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    if sentences.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let max = bound.config().max_positions;
    let continuous = template.is_continuous();
    let extra = match (extra, template.continuous_rows()) {
        (Some(v), _) => Some(v),
        (None, Some(rows)) => Some(g.leaf(rows.clone(), false)),
        (None, None) => None,
    };

    let mut seqs = Vec::with_capacity(sentences.len());
    let mut mask_rows = Vec::with_capacity(sentences.len());
    let mut offset = 0;
    for ids in sentences {
        let enc = template.render(ids, max)?;
        mask_rows.push(offset + enc.mask_index);
        offset += enc.input_ids.len();
        seqs.push(enc.to_sequence(continuous));
    }
    let pass = bound.forward(g, &seqs, extra, rng)?;
    let h = g.select_rows(pass.last(), mask_rows);
    if !denoise {
        return Ok(h);
    }

    // The template bias is deterministic: no dropout on the template-only pass.
    let mut by_len = BTreeMap::new();
    let mut bias_seqs = Vec::new();
    let mut offset = 0;
    for ids in sentences {
        if !by_len.contains_key(&ids.len()) {
            let enc = template.render_bias(ids.len(), max)?;
            by_len.insert(ids.len(), offset + enc.mask_index);
            offset += enc.input_ids.len();
            bias_seqs.push(enc.to_sequence(continuous));
        }
    }
    let bias_rows = sentences.iter().map(|ids| by_len[&ids.len()]).collect();
    let bias_pass = bound.forward(g, &bias_seqs, extra, None)?;
    let h_hat = g.select_rows(bias_pass.last(), bias_rows);
    Ok(g.sub(h, h_hat))
}

fn single(params: &ModelParams, template: &Template, ids: &[u32], denoise: bool, mode: Mode) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let mut rng = dropout_rng(mode);
    let h = mask_states(&mut g, &bound, template, None, &[ids], denoise, rng.as_mut())?;
    Ok(g.value(h).row(0).to_vec())
}

/// The last-layer hidden state at the [MASK] position of the rendered prompt.
pub fn encode_mask(params: &ModelParams, template: &Template, sentence_ids: &[u32], mode: Mode) -> Result<Vec<f64>> {
    single(params, template, sentence_ids, false, mode)
}

/// The [MASK] state of the template alone, with position ids aligned to a
/// sentence of `sentence_len` tokens.
pub fn template_bias(params: &ModelParams, template: &Template, sentence_len: usize, mode: Mode) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let enc = template.render_bias(sentence_len, params.config().max_positions)?;
    let extra = template.continuous_rows().map(|r| g.leaf(r.clone(), false));
    let mut rng = dropout_rng(mode);
    let pass = bound.forward(&mut g, &[enc.to_sequence(template.is_continuous())], extra, rng.as_mut())?;
    Ok(g.value(pass.last()).row(enc.mask_index).to_vec())
}

/// `h − ĥ`.
pub fn denoise(h: &[f64], h_hat: &[f64]) -> Result<Vec<f64>> {
    if h.len() != h_hat.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), found: h_hat.len() });
    }
    Ok(h.iter().zip(h_hat).map(|(a, b)| a - b).collect())
}

/// Ids of the `k` most probable tokens, ties broken towards the lower id.
pub fn top_k_ids(probs: &[f64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..probs.len()).collect();
    ids.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Σ W_v P(v) / Σ P(v) over the top-k tokens.
pub fn topk_average(probs: &[f64], table: &Mat, k: usize) -> Result<Vec<f64>> {
    if probs.len() != table.nrows() {
        return Err(Error::DimensionMismatch { expected: table.nrows(), found: probs.len() });
    }
    if k == 0 || k > probs.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", probs.len())));
    }
    let top = top_k_ids(probs, k);
    if k == 1 {
        return Ok(table.row(top[0]).to_vec());
    }
    let mut out = vec![0.0; table.ncols()];
    let mut total = 0.0;
    for &v in &top {
        total += probs[v];
        for (o, &w) in out.iter_mut().zip(table.row(v)) {
            *o += probs[v] * w;
        }
    }
    if total <= 0.0 {
        return Err(Error::invalid("top-k probability mass is zero"));
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

fn topk_rows(g: &mut Graph, bound: &BoundModel, params: &ModelParams, h: Var, k: usize) -> Result<Vec<Vec<f64>>> {
    let logits = bound.mlm_logits(g, h);
    let mut probs = g.value(logits).clone();
    tape::softmax_rows_inplace(&mut probs);
    probs
        .axis_iter(Axis(0))
        .map(|p| topk_average(p.as_slice().expect("contiguous"), params.token_embeddings(), k))
        .collect()
}

/// Probability-weighted average of the static embeddings of the top-k
/// tokens predicted at [MASK].
pub fn encode_topk(params: &ModelParams, template: &Template, sentence_ids: &[u32], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > params.config().vocab_size {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", params.config().vocab_size)));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let h = mask_states(&mut g, &bound, template, None, &[sentence_ids], false, None)?;
    Ok(topk_rows(&mut g, &bound, params, h, k)?.remove(0))
}

/// Batched inference-mode prompt representations of token sequences.
pub fn encode_prompts(
    params: &ModelParams,
    template: &Template,
    sentences: &[Vec<u32>],
    representation: Representation,
    denoise: bool,
) -> Result<Vec<Vec<f64>>> {
    if let Representation::TopK(k) = representation {
        if k == 0 || k > params.config().vocab_size {
            return Err(Error::invalid(format!("k = {k} outside 1..={}", params.config().vocab_size)));
        }
        if denoise {
            return Err(Error::invalid("denoising applies to the mask representation only"));
        }
    }
    let mut out = Vec::with_capacity(sentences.len());
    for chunk in sentences.chunks(CHUNK) {
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false);
        let refs: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
        let h = mask_states(&mut g, &bound, template, None, &refs, denoise, None)?;
        match representation {
            Representation::Mask => out.extend(g.value(h).axis_iter(Axis(0)).map(|r| r.to_vec())),
            Representation::TopK(k) => out.extend(topk_rows(&mut g, &bound, params, h, k)?),
        }
    }
    Ok(out)
}

/// Prompt-based sentence encoder. Sentences longer than the template leaves
/// room for are truncated.
pub struct PromptEncoder<'a> {
    pub params: &'a ModelParams,
    pub vocab: &'a Vocabulary,
    pub template: &'a Template,
    pub representation: Representation,
    pub denoise: bool,
}

impl<'a> PromptEncoder<'a> {
    pub fn new(params: &'a ModelParams, vocab: &'a Vocabulary, template: &'a Template) -> Self {
        Self { params, vocab, template, representation: Representation::Mask, denoise: false }
    }

    pub fn tokenize(&self, sentence: &str) -> Result<Vec<u32>> {
        let budget = self.template.sentence_budget(self.params.config().max_positions)?;
        let mut ids = tokenize(sentence, self.vocab);
        ids.truncate(budget);
        Ok(ids)
    }
}

impl SentenceEncoder for PromptEncoder<'_> {
    fn dim(&self) -> usize {
        self.params.config().hidden_dim
    }

    fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
        let ids = sentences.iter().map(|s| self.tokenize(s)).collect::<Result<Vec<_>>>()?;
        encode_prompts(self.params, self.template, &ids, self.representation, self.denoise)
    }
}
