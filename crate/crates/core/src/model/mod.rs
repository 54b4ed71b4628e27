//! Toy BERT-style masked-language-model encoder: post-layer-norm blocks,
//! learned absolute positions supplied explicitly per token, GELU
//! feed-forward layers and a tied or untied MLM head.

mod checkpoint;
mod mlm;
mod optim;
pub mod tape;

use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{tokenize, Vocabulary};
use crate::embeddings::{EmbeddingMatrix, SentenceEncoder};
use crate::error::{Error, Result};
use tape::{Graph, Mat, RowSource, Segment, Var};

pub use checkpoint::MLM1_MAGIC;
pub use mlm::{mask_tokens, pretrain_mlm, PretrainConfig, PretrainOutcome};
pub use optim::{Adam, LinearSchedule};

const INIT_STD: f64 = 0.02;
const TENSORS_PER_LAYER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub dropout_p: f64,
    pub tie_mlm_head: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults for the given vocabulary size.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            layers: 4,
            heads: 4,
            hidden_dim: 64,
            ff_dim: 256,
            max_positions: 64,
            vocab_size,
            dropout_p: 0.1,
            tie_mlm_head: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "hidden_dim {} is not divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        if self.vocab_size == 0 || self.max_positions == 0 || self.ff_dim == 0 {
            return Err(Error::invalid("vocab_size, max_positions and ff_dim must be positive"));
        }
        Ok(())
    }
}

/// Named parameter slots; the order is also the checkpoint order.
pub mod slot {
    pub const TOKEN_EMBEDDINGS: usize = 0;
    pub const POSITION_EMBEDDINGS: usize = 1;
    pub const EMBED_LN_GAIN: usize = 2;
    pub const EMBED_LN_BIAS: usize = 3;
    pub const FIRST_LAYER: usize = 4;

    pub const WQ: usize = 0;
    pub const BQ: usize = 1;
    pub const WK: usize = 2;
    pub const BK: usize = 3;
    pub const WV: usize = 4;
    pub const BV: usize = 5;
    pub const WO: usize = 6;
    pub const BO: usize = 7;
    pub const LN1_GAIN: usize = 8;
    pub const LN1_BIAS: usize = 9;
    pub const W1: usize = 10;
    pub const B1: usize = 11;
    pub const W2: usize = 12;
    pub const B2: usize = 13;
    pub const LN2_GAIN: usize = 14;
    pub const LN2_BIAS: usize = 15;
}

const LAYER_NAMES: [&str; TENSORS_PER_LAYER] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2", "ln2_gain",
    "ln2_bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: Vec<Mat>,
}

/// Where each tensor lives in [`ModelParams::tensors`].
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    layers: usize,
    tied: bool,
}

impl Layout {
    pub fn layer(&self, l: usize, which: usize) -> usize {
        slot::FIRST_LAYER + l * TENSORS_PER_LAYER + which
    }

    fn head_base(&self) -> usize {
        slot::FIRST_LAYER + self.layers * TENSORS_PER_LAYER
    }

    pub fn head_transform_w(&self) -> usize {
        self.head_base()
    }

    pub fn head_transform_b(&self) -> usize {
        self.head_base() + 1
    }

    pub fn head_ln_gain(&self) -> usize {
        self.head_base() + 2
    }

    pub fn head_ln_bias(&self) -> usize {
        self.head_base() + 3
    }

    /// The output projection: the token table itself when tied.
    pub fn head_projection(&self) -> usize {
        if self.tied {
            slot::TOKEN_EMBEDDINGS
        } else {
            self.head_base() + 4
        }
    }

    pub fn head_bias(&self) -> usize {
        self.head_base() + if self.tied { 4 } else { 5 }
    }

    pub fn len(&self) -> usize {
        self.head_bias() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            ["token_embeddings", "position_embeddings", "embed_ln_gain", "embed_ln_bias"].map(String::from).into();
        for l in 0..self.layers {
            names.extend(LAYER_NAMES.iter().map(|n| format!("layer{l}.{n}")));
        }
        names.extend(["head.transform_w", "head.transform_b", "head.ln_gain", "head.ln_bias"].map(String::from));
        if !self.tied {
            names.push("head.projection".into());
        }
        names.push("head.bias".into());
        names
    }
}

/// Tensor shapes in layout order.
fn shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
    let (v, d, f, p) = (config.vocab_size, config.hidden_dim, config.ff_dim, config.max_positions);
    let mut out = vec![(v, d), (p, d), (1, d), (1, d)];
    for _ in 0..config.layers {
        out.extend([
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (1, d),
            (1, d),
            (d, f),
            (1, f),
            (f, d),
            (1, d),
            (1, d),
            (1, d),
        ]);
    }
    out.extend([(d, d), (1, d), (1, d), (1, d)]);
    if !config.tie_mlm_head {
        out.push((v, d));
    }
    out.push((1, v));
    out
}

#[derive(Debug, Clone, Copy)]
enum InitKind {
    Normal,
    Zeros,
    Ones,
}

fn init_kinds(config: &ModelConfig) -> Vec<InitKind> {
    use InitKind::*;
    let mut out = vec![Normal, Normal, Ones, Zeros];
    for _ in 0..config.layers {
        out.extend([
            Normal, Zeros, Normal, Zeros, Normal, Zeros, Normal, Zeros, Ones, Zeros, Normal, Zeros, Normal, Zeros,
            Ones, Zeros,
        ]);
    }
    out.extend([Normal, Zeros, Ones, Zeros]);
    if !config.tie_mlm_head {
        out.push(Normal);
    }
    out.push(Zeros);
    out
}

/// Samples fresh parameters: weights from N(0, 0.02²), biases zero and
/// layer-norm gains one. Deterministic in `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let tensors = shapes(config)
        .into_iter()
        .zip(init_kinds(config))
        .map(|(shape, kind)| match kind {
            InitKind::Normal => Mat::from_shape_simple_fn(shape, || normal.sample(&mut rng)),
            InitKind::Zeros => Mat::zeros(shape),
            InitKind::Ones => Mat::ones(shape),
        })
        .collect();
    Ok(ModelParams { config: config.clone(), tensors })
}

impl ModelParams {
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Mat>) -> Result<Self> {
        config.validate()?;
        let expected = shapes(&config);
        if expected.len() != tensors.len() {
            return Err(Error::DimensionMismatch { expected: expected.len(), found: tensors.len() });
        }
        for (i, (t, s)) in tensors.iter().zip(&expected).enumerate() {
            if t.dim() != *s {
                return Err(Error::format(format!("tensor {i} has shape {:?}, expected {s:?}", t.dim())));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout { layers: self.config.layers, tied: self.config.tie_mlm_head }
    }

    pub fn tensors(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    pub fn token_embeddings(&self) -> &Mat {
        &self.tensors[slot::TOKEN_EMBEDDINGS]
    }

    pub fn token_embeddings_mut(&mut self) -> &mut Mat {
        &mut self.tensors[slot::TOKEN_EMBEDDINGS]
    }

    /// The matrix the MLM head projects onto.
    pub fn head_projection(&self) -> &Mat {
        &self.tensors[self.layout().head_projection()]
    }

    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        let mut config = self.config.clone();
        config.dropout_p = p;
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Order-sensitive FNV-1a digest over the raw bits of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tensors {
            for v in t.iter() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// The static token embedding table as an f32 matrix bound to `vocab`.
    pub fn static_embeddings(&self, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.token_embeddings().mapv(|v| v as f32), vocab.clone())
    }

    /// The MLM output projection as an embedding matrix.
    pub fn head_embeddings(&self, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.head_projection().mapv(|v| v as f32), vocab.clone())
    }

    /// Registers every tensor as a graph leaf.
    pub fn bind(&self, g: &mut Graph, requires_grad: bool) -> BoundModel {
        BoundModel {
            vars: self.tensors.iter().map(|t| g.leaf(t.clone(), requires_grad)).collect(),
            layout: self.layout(),
            config: self.config.clone(),
        }
    }
}

/// A token fed to the encoder: a vocabulary id or a row of an auxiliary
/// trainable table (continuous template tokens).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputToken {
    Id(u32),
    Extra(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInput {
    pub tokens: Vec<InputToken>,
    pub positions: Vec<usize>,
}

impl SequenceInput {
    pub fn from_ids(ids: &[u32]) -> Self {
        Self { tokens: ids.iter().map(|&i| InputToken::Id(i)).collect(), positions: (0..ids.len()).collect() }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    Train { dropout_seed: u64 },
}

/// Parameters registered in a graph.
pub struct BoundModel {
    pub vars: Vec<Var>,
    layout: Layout,
    config: ModelConfig,
}

/// Per-layer outputs of a batched forward pass over concatenated sequences.
pub struct ForwardPass {
    /// Layer 0 is the embedding output, the last entry the final layer.
    pub layers: Vec<Var>,
    pub segments: Vec<Segment>,
}

impl ForwardPass {
    pub fn last(&self) -> Var {
        *self.layers.last().expect("at least the embedding layer")
    }

    /// Global row index of position `i` within sequence `seq`.
    pub fn row(&self, seq: usize, i: usize) -> usize {
        self.segments[seq].start + i
    }
}

impl BoundModel {
    fn var(&self, i: usize) -> Var {
        self.vars[i]
    }

    fn layer_var(&self, l: usize, which: usize) -> Var {
        self.vars[self.layout.layer(l, which)]
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Runs the encoder over all sequences in one graph. Dropout masks are
    /// drawn from `dropout_rng` in a fixed order when it is given.
    pub fn forward(
        &self,
        g: &mut Graph,
        seqs: &[SequenceInput],
        extra: Option<Var>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass> {
        let cfg = &self.config;
        let mut sources = Vec::new();
        let mut positions = Vec::new();
        let mut segments = Vec::with_capacity(seqs.len());
        for seq in seqs {
            if seq.tokens.len() != seq.positions.len() {
                return Err(Error::DimensionMismatch { expected: seq.tokens.len(), found: seq.positions.len() });
            }
            if seq.tokens.is_empty() {
                return Err(Error::invalid("cannot run the encoder on an empty sequence"));
            }
            segments.push(Segment { start: sources.len(), len: seq.tokens.len() });
            for (&tok, &pos) in seq.tokens.iter().zip(&seq.positions) {
                if pos >= cfg.max_positions {
                    return Err(Error::PositionOverflow { position: pos, max: cfg.max_positions });
                }
                sources.push(match tok {
                    InputToken::Id(id) if (id as usize) < cfg.vocab_size => RowSource::Table(id as usize),
                    InputToken::Id(id) => {
                        return Err(Error::invalid(format!("token id {id} outside vocabulary of {}", cfg.vocab_size)))
                    }
                    InputToken::Extra(r) => {
                        let e = extra.ok_or_else(|| Error::invalid("template row used without a template table"))?;
                        if r >= g.value(e).nrows() {
                            return Err(Error::invalid(format!("template row {r} out of range")));
                        }
                        RowSource::Extra(r)
                    }
                });
                positions.push(RowSource::Table(pos));
            }
        }

        let p = if dropout_rng.is_some() { cfg.dropout_p } else { 0.0 };
        let mut dropout = |g: &mut Graph, x: Var| match dropout_rng.as_deref_mut() {
            Some(rng) => g.dropout(x, p, rng),
            None => x,
        };

        let tok = g.gather(self.var(slot::TOKEN_EMBEDDINGS), extra, sources);
        let pos = g.gather(self.var(slot::POSITION_EMBEDDINGS), None, positions);
        let x = g.add(tok, pos);
        let x = g.layer_norm(x, self.var(slot::EMBED_LN_GAIN), self.var(slot::EMBED_LN_BIAS));
        let mut x = dropout(g, x);
        let mut layers = vec![x];

        for l in 0..cfg.layers {
            let w = |which| self.layer_var(l, which);
            let q = g.linear(x, w(slot::WQ), w(slot::BQ));
            let k = g.linear(x, w(slot::WK), w(slot::BK));
            let v = g.linear(x, w(slot::WV), w(slot::BV));
            let att = g.attention(q, k, v, segments.clone(), cfg.heads);
            let att = g.linear(att, w(slot::WO), w(slot::BO));
            let att = dropout(g, att);
            let res = g.add(x, att);
            let h = g.layer_norm(res, w(slot::LN1_GAIN), w(slot::LN1_BIAS));
            let ff = g.linear(h, w(slot::W1), w(slot::B1));
            let ff = g.gelu(ff);
            let ff = g.linear(ff, w(slot::W2), w(slot::B2));
            let ff = dropout(g, ff);
            let res = g.add(h, ff);
            x = g.layer_norm(res, w(slot::LN2_GAIN), w(slot::LN2_BIAS));
            layers.push(x);
        }
        Ok(ForwardPass { layers, segments })
    }

    /// Vocabulary logits for each row of `hidden`.
    pub fn mlm_logits(&self, g: &mut Graph, hidden: Var) -> Var {
        let lay = self.layout;
        let t = g.linear(hidden, self.var(lay.head_transform_w()), self.var(lay.head_transform_b()));
        let t = g.gelu(t);
        let t = g.layer_norm(t, self.var(lay.head_ln_gain()), self.var(lay.head_ln_bias()));
        let logits = g.matmul_t(t, self.var(lay.head_projection()));
        g.add_row(logits, self.var(lay.head_bias()))
    }
}

pub(crate) fn dropout_rng(mode: Mode) -> Option<ChaCha8Rng> {
    match mode {
        Mode::Inference => None,
        Mode::Train { dropout_seed } => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
    }
}

/// Activations of every layer for one sequence: layer 0 is the embedding
/// output, layer L the last encoder layer.
#[derive(Debug, Clone)]
pub struct HiddenStates {
    pub layers: Vec<Mat>,
}

impl HiddenStates {
    pub fn last(&self) -> &Mat {
        self.layers.last().expect("non-empty")
    }
}

pub fn forward(params: &ModelParams, ids: &[u32], position_ids: &[usize], mode: Mode) -> Result<HiddenStates> {
    let seq = SequenceInput { tokens: ids.iter().map(|&i| InputToken::Id(i)).collect(), positions: position_ids.to_vec() };
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let mut rng = dropout_rng(mode);
    let pass = bound.forward(&mut g, &[seq], None, rng.as_mut())?;
    Ok(HiddenStates { layers: pass.layers.iter().map(|&v| g.value(v).clone()).collect() })
}

/// Softmax of the MLM head applied to a single hidden vector.
pub fn mlm_distribution(params: &ModelParams, hidden: &[f64]) -> Result<Vec<f64>> {
    let d = params.config.hidden_dim;
    if hidden.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: hidden.len() });
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let h = g.leaf(Mat::from_shape_vec((1, d), hidden.to_vec()).expect("shape"), false);
    let logits = bound.mlm_logits(&mut g, h);
    let mut probs = g.value(logits).clone();
    tape::softmax_rows_inplace(&mut probs);
    Ok(probs.into_raw_vec_and_offset().0)
}

fn mean_rows(m: &Mat) -> Vec<f64> {
    m.mean_axis(Axis(0)).expect("non-empty").to_vec()
}

/// Mean of the last-layer states over the sequence.
pub fn encode_last_avg(params: &ModelParams, ids: &[u32]) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty token sequence"));
    }
    let positions: Vec<usize> = (0..ids.len()).collect();
    Ok(mean_rows(forward(params, ids, &positions, Mode::Inference)?.last()))
}

/// Average of the embedding-layer mean and the last-layer mean.
pub fn encode_first_last_avg(params: &ModelParams, ids: &[u32]) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty token sequence"));
    }
    let positions: Vec<usize> = (0..ids.len()).collect();
    let states = forward(params, ids, &positions, Mode::Inference)?;
    let first = mean_rows(&states.layers[0]);
    let last = mean_rows(states.last());
    Ok(first.iter().zip(&last).map(|(a, b)| 0.5 * (a + b)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    LastAvg,
    FirstLastAvg,
}

/// Pooled encoder outputs as a sentence encoder.
pub struct PooledEncoder<'a> {
    pub params: &'a ModelParams,
    pub vocab: &'a Vocabulary,
    pub pooling: Pooling,
}

impl SentenceEncoder for PooledEncoder<'_> {
    fn dim(&self) -> usize {
        self.params.config.hidden_dim
    }

    fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
        let max = self.params.config.max_positions;
        let seqs: Vec<SequenceInput> = sentences
            .iter()
            .map(|s| {
                let mut ids = tokenize(s, self.vocab);
                ids.truncate(max);
                SequenceInput::from_ids(&ids)
            })
            .collect();
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g, false);
        let pass = bound.forward(&mut g, &seqs, None, None)?;
        let first = g.value(pass.layers[0]);
        let last = g.value(pass.last());
        Ok(pass
            .segments
            .iter()
            .map(|seg| {
                let rows = seg.start..seg.start + seg.len;
                let l = mean_rows(&last.slice(ndarray::s![rows.clone(), ..]).to_owned());
                match self.pooling {
                    Pooling::LastAvg => l,
                    Pooling::FirstLastAvg => {
                        let f = mean_rows(&first.slice(ndarray::s![rows, ..]).to_owned());
                        f.iter().zip(&l).map(|(a, b)| 0.5 * (a + b)).collect()
                    }
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny(tied: bool, layers: usize) -> ModelParams {
        let config = ModelConfig {
            layers,
            heads: 2,
            hidden_dim: 8,
            ff_dim: 16,
            max_positions: 16,
            vocab_size: 20,
            dropout_p: 0.1,
            tie_mlm_head: tied,
            seed: 7,
        };
        init_model(&config).unwrap()
    }

    /// Perturbs every tensor so layer norms and biases are non-trivial.
    fn scrambled(tied: bool, layers: usize) -> ModelParams {
        let mut p = tiny(tied, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = Normal::new(0.0, 0.5).unwrap();
        for t in p.tensors_mut() {
            t.mapv_inplace(|v| v + n.sample(&mut rng));
        }
        p
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = tiny(true, 2);
        let b = tiny(true, 2);
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        let gain = &a.tensors()[a.layout().layer(1, slot::LN1_GAIN)];
        assert!(gain.iter().all(|&v| v == 1.0));
        assert_eq!(a.layout().names().len(), a.tensors().len());
    }

    #[test]
    fn tied_head_is_the_token_table() {
        let p = tiny(true, 1);
        assert_eq!(p.layout().head_projection(), slot::TOKEN_EMBEDDINGS);
        assert!(std::ptr::eq(p.head_projection(), p.token_embeddings()));
        let u = tiny(false, 1);
        assert_ne!(u.layout().head_projection(), slot::TOKEN_EMBEDDINGS);
        assert_eq!(u.tensors().len(), p.tensors().len() + 1);
    }

    #[test]
    fn tied_row_edit_moves_the_logit() {
        let mut p = scrambled(true, 1);
        let h = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.7];
        let before = mlm_distribution(&p, &h).unwrap();
        p.token_embeddings_mut().row_mut(6).mapv_inplace(|v| v * 3.0 + 0.5);
        let after = mlm_distribution(&p, &h).unwrap();
        assert_ne!(before[6], after[6]);
    }

    #[test]
    fn odd_head_split_rejected() {
        let mut c = tiny(true, 1).config().clone();
        c.heads = 3;
        assert!(init_model(&c).is_err());
    }

    #[test]
    fn dropout_zero_train_equals_inference() {
        let mut p = scrambled(true, 2);
        p.set_dropout(0.0).unwrap();
        let ids = [5, 9, 3, 11];
        let pos = [0, 1, 2, 3];
        let a = forward(&p, &ids, &pos, Mode::Inference).unwrap();
        let b = forward(&p, &ids, &pos, Mode::Train { dropout_seed: 4 }).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.layers.len(), 3);
    }

    #[test]
    fn train_mode_is_reproducible_and_noisy() {
        let p = scrambled(true, 2);
        let ids = [5, 9, 3, 11];
        let pos = [0, 1, 2, 3];
        let a = forward(&p, &ids, &pos, Mode::Train { dropout_seed: 4 }).unwrap();
        let b = forward(&p, &ids, &pos, Mode::Train { dropout_seed: 4 }).unwrap();
        let c = forward(&p, &ids, &pos, Mode::Train { dropout_seed: 5 }).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_ne!(a.layers, c.layers);
    }

    #[test]
    fn positions_matter() {
        let p = scrambled(true, 2);
        let ids = [5, 9, 3];
        let a = forward(&p, &ids, &[0, 1, 2], Mode::Inference).unwrap();
        let b = forward(&p, &ids, &[2, 0, 1], Mode::Inference).unwrap();
        let diff = (a.last() - b.last()).mapv(|v| v * v).sum().sqrt();
        assert!(diff > 1e-6);
        assert!(matches!(
            forward(&p, &ids, &[0, 1, 16], Mode::Inference),
            Err(Error::PositionOverflow { position: 16, .. })
        ));
    }

    #[test]
    fn mlm_distribution_properties() {
        let p = scrambled(false, 1);
        let h = vec![1.0, -0.5, 0.25, 2.0, 0.0, -1.0, 0.5, 0.3];
        let probs = mlm_distribution(&p, &h).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let mut shifted = p.clone();
        let bias = shifted.layout().head_bias();
        shifted.tensors_mut()[bias].mapv_inplace(|v| v + 3.5);
        let probs2 = mlm_distribution(&shifted, &h).unwrap();
        for (a, b) in probs.iter().zip(&probs2) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn two_way_uniform_distribution() {
        let config = ModelConfig {
            layers: 0,
            heads: 1,
            hidden_dim: 2,
            ff_dim: 2,
            max_positions: 2,
            vocab_size: 2,
            dropout_p: 0.0,
            tie_mlm_head: true,
            seed: 1,
        };
        let mut p = init_model(&config).unwrap();
        p.token_embeddings_mut().fill(0.5);
        let probs = mlm_distribution(&p, &[0.2, -0.1]).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-12 && (probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pooling_edge_cases() {
        let p = scrambled(true, 2);
        let single = encode_last_avg(&p, &[7]).unwrap();
        let states = forward(&p, &[7], &[0], Mode::Inference).unwrap();
        assert_eq!(single, states.last().row(0).to_vec());

        let shallow = scrambled(true, 0);
        assert_eq!(encode_first_last_avg(&shallow, &[3, 4]).unwrap(), encode_last_avg(&shallow, &[3, 4]).unwrap());
        assert!(encode_last_avg(&p, &[]).is_err());

        let fwd = encode_last_avg(&p, &[3, 8]).unwrap();
        let rev = encode_last_avg(&p, &[8, 3]).unwrap();
        let diff: f64 = fwd.iter().zip(&rev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff > 1e-6);
    }
}
