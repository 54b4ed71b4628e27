use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::tape::{Graph, Mat};
use crate::model::{Adam, LinearSchedule, ModelParams};
use crate::training::{BatchSampler, DEFAULT_TEMPERATURE};

use super::encode::mask_states;
use super::template::Template;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        Self { steps: 300, batch_size: 16, learning_rate: 1e-2, temperature: DEFAULT_TEMPERATURE, seed: 0 }
    }
}

/// Learns free embedding rows for the template's literal tokens with the
/// dropout contrastive objective, starting from their static embeddings.
/// Encoder parameters are never written.
pub fn train_continuous_template(
    params: &ModelParams,
    init: &Template,
    sentences: &[Vec<u32>],
    config: &ContinuousConfig,
) -> Result<Template> {
    if init.is_continuous() {
        return Err(Error::invalid("initial template must be manual"));
    }
    let table = params.token_embeddings();
    let ids = init.literal_ids();
    let mut rows = Mat::from_shape_fn((ids.len(), table.ncols()), |(r, c)| table[[ids[r] as usize, c]]);
    if config.steps == 0 {
        return init.with_rows(rows);
    }
    if ids.is_empty() {
        return Err(Error::invalid("template has no literal tokens to train"));
    }
    if !(config.temperature > 0.0) || config.batch_size == 0 {
        return Err(Error::invalid("temperature must be positive and batch_size at least 1"));
    }
    let budget = init.sentence_budget(params.config().max_positions)?;
    let data: Vec<&[u32]> =
        sentences.iter().filter(|s| !s.is_empty()).map(|s| &s[..s.len().min(budget)]).collect();
    if data.len() < config.batch_size {
        return Err(Error::invalid(format!("{} usable sentences, fewer than one batch", data.len())));
    }

    let schedule = LinearSchedule::new(config.learning_rate, config.steps);
    let mut adam = Adam::new(std::slice::from_ref(&rows));
    let mut sampler = BatchSampler::new(data.len(), config.seed);
    for step in 0..config.steps {
        let batch: Vec<&[u32]> = sampler.next(config.batch_size).into_iter().map(|i| data[i]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed());
        let current = init.with_rows(rows.clone())?;
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false);
        let extra = g.leaf(rows.clone(), true);
        let a = mask_states(&mut g, &bound, &current, Some(extra), &batch, false, Some(&mut rng))?;
        let b = mask_states(&mut g, &bound, &current, Some(extra), &batch, false, Some(&mut rng))?;
        let loss = g.info_nce(a, b, config.temperature)?;
        if !g.scalar(loss).is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        let grad = g.backward(loss).take(extra);
        adam.step(std::slice::from_mut(&mut rows), &[grad], schedule.lr(step));
    }
    init.with_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, tokenize, Corpus, SubwordConvention};
    use crate::model::{init_model, ModelConfig};
    use crate::prompt::{encode_mask, parse_template};
    use crate::model::Mode;

    #[test]
    fn zero_steps_copies_static_rows_and_training_freezes_encoder() {
        let corpus = Corpus::from_text("the cat sat\na dog ran\nmeans this .\n");
        let vocab = build_vocab(&corpus, 60, SubwordConvention::Continuation).unwrap();
        let config = ModelConfig {
            layers: 1,
            heads: 2,
            hidden_dim: 8,
            ff_dim: 16,
            max_positions: 16,
            vocab_size: vocab.len(),
            dropout_p: 0.1,
            tie_mlm_head: true,
            seed: 1,
        };
        let params = init_model(&config).unwrap();
        let t = parse_template("this [X] means [MASK] .", &vocab).unwrap();
        let sents: Vec<Vec<u32>> = ["the cat sat", "a dog ran", "the dog sat", "a cat ran"].iter().map(|s| tokenize(s, &vocab)).collect();

        let zero = train_continuous_template(&params, &t, &sents, &ContinuousConfig { steps: 0, ..Default::default() }).unwrap();
        let rows = zero.continuous_rows().unwrap();
        for (r, id) in t.literal_ids().into_iter().enumerate() {
            assert_eq!(rows.row(r), params.token_embeddings().row(id as usize));
        }
        // Rows equal to the static ones reproduce the manual encoding.
        let ids = &sents[0];
        assert_eq!(encode_mask(&params, &zero, ids, Mode::Inference).unwrap(), encode_mask(&params, &t, ids, Mode::Inference).unwrap());

        let before = params.checksum();
        let cfg = ContinuousConfig { steps: 5, batch_size: 4, learning_rate: 1e-2, ..Default::default() };
        let trained = train_continuous_template(&params, &t, &sents, &cfg).unwrap();
        assert_eq!(params.checksum(), before);
        assert_ne!(trained.continuous_rows().unwrap(), rows);
    }
}
