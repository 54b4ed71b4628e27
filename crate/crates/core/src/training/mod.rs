//! Prompt-based contrastive learning: positive pairs under three objectives,
//! the in-batch InfoNCE loss, the optimization loop and gradient checking.

mod gradcheck;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{cosine, spearman, StsPair};
use crate::model::tape::{info_nce_loss, Graph, Mat, Var};
use crate::model::{dropout_rng, Adam, BoundModel, LinearSchedule, Mode, ModelParams};
use crate::prompt::{encode_prompts, mask_states, Representation, Template};

pub use gradcheck::{grad_check, GradCheckReport};

pub const DEFAULT_TEMPERATURE: f64 = 0.05;

/// How the two views of each sentence are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// One template, two dropout masks.
    SameTemplateDropout,
    /// Two different templates.
    TwoTemplates,
    /// Two different templates, each view minus its template bias.
    TwoTemplatesDenoised,
}

impl Objective {
    pub const ALL: [Objective; 3] =
        [Objective::SameTemplateDropout, Objective::TwoTemplates, Objective::TwoTemplatesDenoised];

    pub fn name(self) -> &'static str {
        match self {
            Objective::SameTemplateDropout => "same-template-dropout",
            Objective::TwoTemplates => "two-templates",
            Objective::TwoTemplatesDenoised => "two-templates-denoised",
        }
    }

    pub fn needs_two_templates(self) -> bool {
        self != Objective::SameTemplateDropout
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "same-template-dropout" | "dropout" => Objective::SameTemplateDropout,
            "two-templates" | "templates" => Objective::TwoTemplates,
            "two-templates-denoised" | "denoised" => Objective::TwoTemplatesDenoised,
            other => return Err(Error::invalid(format!("unknown objective {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Caps the number of optimizer steps; training cycles through the data
    /// as often as needed to reach it.
    pub max_steps: Option<usize>,
    pub objective: Objective,
    pub templates: Vec<Template>,
    pub seed: u64,
    /// Dev evaluation interval in steps; 0 evaluates only at the end.
    pub valid_steps: usize,
}

impl TrainConfig {
    pub fn new(objective: Objective, templates: Vec<Template>) -> Self {
        Self {
            batch_size: 256,
            temperature: DEFAULT_TEMPERATURE,
            learning_rate: 1e-5,
            epochs: 1,
            max_steps: None,
            objective,
            templates,
            seed: 0,
            valid_steps: 125,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning_rate must be non-negative"));
        }
        match (self.objective.needs_two_templates(), self.templates.len()) {
            (_, 0) => Err(Error::invalid("at least one template is required")),
            (true, 1) => Err(Error::invalid(format!("{} needs two templates", self.objective))),
            (true, _) if self.templates[0].text() == self.templates[1].text() => {
                Err(Error::invalid(format!("{} needs two distinct templates", self.objective)))
            }
            _ => Ok(()),
        }
    }

    fn total_steps(&self, n: usize) -> usize {
        self.max_steps.unwrap_or(self.epochs * (n / self.batch_size).max(1))
    }
}

/// Anchor and positive views, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub anchors: Mat,
    pub positives: Mat,
}

/// Both views of a batch inside a graph.
pub(crate) fn pair_vars(
    g: &mut Graph,
    bound: &BoundModel,
    sentences: &[&[u32]],
    objective: Objective,
    templates: &[Template],
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Var, Var)> {
    let (first, second, denoise) = match objective {
        Objective::SameTemplateDropout => (&templates[0], &templates[0], false),
        Objective::TwoTemplates => (&templates[0], &templates[1], false),
        Objective::TwoTemplatesDenoised => (&templates[0], &templates[1], true),
    };
    let a = mask_states(g, bound, first, None, sentences, denoise, rng.as_deref_mut())?;
    let b = mask_states(g, bound, second, None, sentences, denoise, rng)?;
    Ok((a, b))
}

/// Builds the two views of `sentences` under `config.objective`.
pub fn build_pairs(params: &ModelParams, sentences: &[Vec<u32>], config: &TrainConfig, mode: Mode) -> Result<PairBatch> {
    config.validate()?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let refs: Vec<&[u32]> = sentences.iter().map(Vec::as_slice).collect();
    let mut rng = dropout_rng(mode);
    let (a, b) = pair_vars(&mut g, &bound, &refs, config.objective, &config.templates, rng.as_mut())?;
    Ok(PairBatch { anchors: g.value(a).clone(), positives: g.value(b).clone() })
}

/// Mean over rows of `−log softmax_j(cos(H_i, H′_j) / τ)` at `j = i`.
pub fn contrastive_loss(batch: &PairBatch, temperature: f64) -> Result<f64> {
    info_nce_loss(&batch.anchors, &batch.positives, temperature)
}

/// The contrastive loss of one batch and its gradient with respect to every
/// parameter tensor, in layout order.
pub fn contrastive_gradients(
    params: &ModelParams,
    sentences: &[Vec<u32>],
    config: &TrainConfig,
    mode: Mode,
) -> Result<(f64, Vec<Mat>)> {
    config.validate()?;
    let refs: Vec<&[u32]> = sentences.iter().map(Vec::as_slice).collect();
    let mut rng = dropout_rng(mode);
    batch_gradients(params, &refs, config, rng.as_mut())
}

fn batch_gradients(
    params: &ModelParams,
    batch: &[&[u32]],
    config: &TrainConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Mat>)> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, true);
    let (a, b) = pair_vars(&mut g, &bound, batch, config.objective, &config.templates, rng)?;
    let loss = g.info_nce(a, b, config.temperature)?;
    let value = g.scalar(loss);
    let mut grads = g.backward(loss);
    let grads = bound
        .vars
        .iter()
        .zip(params.tensors())
        .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Mat::zeros(t.dim())))
        .collect();
    Ok((value, grads))
}

/// Tokenized STS pairs for periodic validation.
#[derive(Debug, Clone)]
pub struct DevSet {
    first: Vec<Vec<u32>>,
    second: Vec<Vec<u32>>,
    gold: Vec<f64>,
}

impl DevSet {
    pub fn new(pairs: &[StsPair], vocab: &Vocabulary) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::invalid("a dev set needs at least two pairs"));
        }
        Ok(Self {
            first: pairs.iter().map(|p| tokenize(&p.sentence1, vocab)).collect(),
            second: pairs.iter().map(|p| tokenize(&p.sentence2, vocab)).collect(),
            gold: pairs.iter().map(|p| p.gold).collect(),
        })
    }

    /// Spearman of prompt-representation cosines against gold, using one
    /// template and no denoising.
    pub fn evaluate(&self, params: &ModelParams, template: &Template) -> Result<f64> {
        let budget = template.sentence_budget(params.config().max_positions)?;
        let clip = |v: &[Vec<u32>]| -> Vec<Vec<u32>> { v.iter().map(|s| s[..s.len().min(budget)].to_vec()).collect() };
        let a = encode_prompts(params, template, &clip(&self.first), Representation::Mask, false)?;
        let b = encode_prompts(params, template, &clip(&self.second), Representation::Mask, false)?;
        let predicted = a.iter().zip(&b).map(|(u, v)| cosine(u, v)).collect::<Result<Vec<_>>>()?;
        spearman(&predicted, &self.gold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub train_loss: f64,
    pub dev_spearman: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The best-dev parameters when a dev set was given, else the final ones.
    pub params: ModelParams,
    pub trace: Vec<TraceRow>,
    pub best_step: Option<usize>,
    pub best_dev: Option<f64>,
}

/// Writes the metric trace as `step  train_loss  dev_spearman` TSV.
pub fn write_trace<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "step\ttrain_loss\tdev_spearman")?;
    for row in trace {
        let dev = row.dev_spearman.map_or(String::new(), |d| format!("{d:.6}"));
        writeln!(out, "{}\t{:.6}\t{dev}", row.step, row.train_loss)?;
    }
    Ok(())
}

/// Cycles through shuffled indices, reshuffling at every epoch boundary.
pub(crate) struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub(crate) fn new(n: usize, seed: u64) -> Self {
        Self { order: (0..n).collect(), cursor: n, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `size` distinct indices (when `size ≤ n`), drawn without replacement
    /// within each epoch.
    pub(crate) fn next(&mut self, size: usize) -> Vec<usize> {
        if self.cursor + size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + size].to_vec();
        self.cursor += size;
        out
    }

    pub(crate) fn seed(&mut self) -> u64 {
        self.rng.random()
    }
}

/// Contrastive training of every encoder parameter. Empty sentences are
/// skipped; sentences are truncated to fit the longest template.
pub fn train(
    params: ModelParams,
    sentences: &[Vec<u32>],
    dev: Option<&DevSet>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let max = params.config().max_positions;
    let budget = config.templates.iter().map(|t| t.sentence_budget(max)).collect::<Result<Vec<_>>>()?;
    let budget = budget.into_iter().min().expect("validated non-empty");
    let data: Vec<Vec<u32>> =
        sentences.iter().filter(|s| !s.is_empty()).map(|s| s[..s.len().min(budget)].to_vec()).collect();
    if data.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "{} usable sentences, fewer than one batch of {}",
            data.len(),
            config.batch_size
        )));
    }

    let total = config.total_steps(data.len());
    let schedule = LinearSchedule::new(config.learning_rate, total);
    let mut params = params;
    let mut adam = Adam::new(params.tensors());
    let mut sampler = BatchSampler::new(data.len(), config.seed);
    let mut trace = Vec::with_capacity(total);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for step in 0..total {
        let batch: Vec<&[u32]> = sampler.next(config.batch_size).into_iter().map(|i| data[i].as_slice()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed());
        let (value, grads) = batch_gradients(&params, &batch, config, Some(&mut rng))?;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        let grads: Vec<_> = grads.into_iter().map(Some).collect();
        adam.step(params.tensors_mut(), &grads, schedule.lr(step));

        let done = step + 1;
        let validate = config.valid_steps > 0 && done % config.valid_steps == 0 || done == total;
        let dev_spearman = match dev {
            Some(d) if validate => Some(d.evaluate(&params, &config.templates[0])?),
            _ => None,
        };
        if let Some(score) = dev_spearman {
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, done, params.clone()));
            }
        }
        trace.push(TraceRow { step: done, train_loss: value, dev_spearman });
    }

    Ok(match best {
        Some((score, step, best_params)) => {
            TrainOutcome { params: best_params, trace, best_step: Some(step), best_dev: Some(score) }
        }
        None => TrainOutcome { params, trace, best_step: None, best_dev: None },
    })
}
