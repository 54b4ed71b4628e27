use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::SpecialIds;
use crate::error::{Error, Result};

use super::optim::{Adam, LinearSchedule};
use super::tape::Graph;
use super::{ModelParams, SequenceInput};

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub mask_prob: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { steps: 1000, batch_size: 16, mask_prob: 0.15, learning_rate: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: ModelParams,
    /// Masked cross-entropy of every step, before its update.
    pub losses: Vec<f64>,
}

/// Corrupts a sequence with the 80/10/10 rule. Returns the corrupted ids and
/// the (position, original id) targets. Specials are never selected.
pub fn mask_tokens<R: Rng>(
    ids: &[u32],
    mask_prob: f64,
    vocab_size: usize,
    specials: &SpecialIds,
    rng: &mut R,
) -> (Vec<u32>, Vec<(usize, u32)>) {
    let special = specials.all();
    let mut out = ids.to_vec();
    let mut targets = Vec::new();
    for (i, &id) in ids.iter().enumerate() {
        if special.contains(&id) || rng.random::<f64>() >= mask_prob {
            continue;
        }
        targets.push((i, id));
        let roll: f64 = rng.random();
        if roll < 0.8 {
            out[i] = specials.mask;
        } else if roll < 0.9 {
            out[i] = random_regular(vocab_size, &special, rng);
        }
    }
    (out, targets)
}

fn random_regular<R: Rng>(vocab_size: usize, special: &[u32], rng: &mut R) -> u32 {
    loop {
        let id = rng.random_range(0..vocab_size as u32);
        if !special.contains(&id) || vocab_size <= special.len() {
            return id;
        }
    }
}

/// Masked-language-model pretraining with Adam and a warmup/decay schedule.
/// Sequences longer than the model's position budget are truncated.
pub fn pretrain_mlm(
    mut params: ModelParams,
    sequences: &[Vec<u32>],
    specials: &SpecialIds,
    config: &PretrainConfig,
) -> Result<PretrainOutcome> {
    if config.steps == 0 || config.batch_size == 0 {
        return Err(Error::invalid("steps and batch_size must be at least 1"));
    }
    if config.mask_prob <= 0.0 {
        return Err(Error::NothingToPredict);
    }
    if config.mask_prob > 1.0 {
        return Err(Error::invalid(format!("mask_prob {} above 1", config.mask_prob)));
    }
    let max = params.config().max_positions;
    let special = specials.all();
    let data: Vec<Vec<u32>> = sequences
        .iter()
        .filter(|s| s.iter().any(|id| !special.contains(id)))
        .map(|s| s[..s.len().min(max)].to_vec())
        .collect();
    if data.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "corpus has {} usable sentences, fewer than one batch of {}",
            data.len(),
            config.batch_size
        )));
    }

    let vocab_size = params.config().vocab_size;
    let schedule = LinearSchedule::new(config.learning_rate, config.steps);
    let mut adam = Adam::new(params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut seqs = Vec::with_capacity(config.batch_size);
        let mut targets = Vec::new();
        let mut offset = 0;
        for _ in 0..config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ids = &data[order[cursor]];
            cursor += 1;
            let (mut corrupted, mut picked) = mask_tokens(ids, config.mask_prob, vocab_size, specials, &mut rng);
            if picked.is_empty() {
                // Every sequence contributes at least one prediction.
                let candidates: Vec<usize> = (0..ids.len()).filter(|&i| !special.contains(&ids[i])).collect();
                let i = candidates[rng.random_range(0..candidates.len())];
                picked.push((i, ids[i]));
                corrupted[i] = specials.mask;
            }
            targets.extend(picked.into_iter().map(|(i, id)| (offset + i, id as usize)));
            offset += ids.len();
            seqs.push(SequenceInput::from_ids(&corrupted));
        }

        let mut dropout = ChaCha8Rng::seed_from_u64(rng.random());
        let mut g = Graph::new();
        let bound = params.bind(&mut g, true);
        let pass = bound.forward(&mut g, &seqs, None, Some(&mut dropout))?;
        let (rows, labels): (Vec<usize>, Vec<usize>) = targets.into_iter().unzip();
        let hidden = g.select_rows(pass.last(), rows);
        let logits = bound.mlm_logits(&mut g, hidden);
        let loss = g.cross_entropy(logits, labels)?;
        let value = g.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        losses.push(value);
        let mut grads = g.backward(loss);
        let grads: Vec<_> = bound.vars.iter().map(|&v| grads.take(v)).collect();
        adam.step(params.tensors_mut(), &grads, schedule.lr(step));
    }
    Ok(PretrainOutcome { params, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tape::Mat;
    use crate::model::{init_model, ModelConfig};

    const SPECIALS: SpecialIds = SpecialIds { pad: 0, unk: 1, cls: 2, sep: 3, mask: 4 };

    fn config(v: usize, tied: bool) -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            hidden_dim: 16,
            ff_dim: 32,
            max_positions: 16,
            vocab_size: v,
            dropout_p: 0.1,
            tie_mlm_head: tied,
            seed: 3,
        }
    }

    /// Repetitive sequences over a small alphabet with local structure.
    fn toy_corpus(n: usize, v: u32) -> Vec<Vec<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..n)
            .map(|_| {
                let start = rng.random_range(5..v);
                (0..6).map(|k| 5 + (start - 5 + k) % (v - 5)).collect()
            })
            .collect()
    }

    #[test]
    fn masking_rule_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<u32> = (0..20_000).map(|i| 5 + (i % 50)).collect();
        let (out, targets) = mask_tokens(&ids, 0.15, 55, &SPECIALS, &mut rng);
        let selected = targets.len() as f64 / ids.len() as f64;
        assert!((selected - 0.15).abs() < 0.01, "{selected}");
        let masked = targets.iter().filter(|(i, _)| out[*i] == 4).count() as f64 / targets.len() as f64;
        let kept = targets.iter().filter(|(i, id)| out[*i] == *id).count() as f64 / targets.len() as f64;
        assert!((masked - 0.8).abs() < 0.03, "{masked}");
        // Random replacements occasionally draw the original token.
        assert!((kept - 0.1).abs() < 0.03, "{kept}");
        for (i, (&a, &b)) in ids.iter().zip(&out).enumerate() {
            if a != b {
                assert!(targets.iter().any(|(t, _)| *t == i));
            }
        }
    }

    #[test]
    fn specials_never_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ids = vec![2, 7, 8, 3];
        for _ in 0..200 {
            let (_, targets) = mask_tokens(&ids, 0.9, 10, &SPECIALS, &mut rng);
            assert!(targets.iter().all(|(i, _)| *i == 1 || *i == 2));
        }
    }

    #[test]
    fn zero_mask_prob_has_nothing_to_predict() {
        let p = init_model(&config(20, true)).unwrap();
        let cfg = PretrainConfig { mask_prob: 0.0, ..Default::default() };
        assert!(matches!(pretrain_mlm(p, &toy_corpus(32, 20), &SPECIALS, &cfg), Err(Error::NothingToPredict)));
    }

    #[test]
    fn short_corpus_rejected() {
        let p = init_model(&config(20, true)).unwrap();
        let cfg = PretrainConfig { batch_size: 8, ..Default::default() };
        assert!(pretrain_mlm(p, &toy_corpus(4, 20), &SPECIALS, &cfg).is_err());
    }

    #[test]
    fn initial_loss_near_uniform() {
        let v = 64;
        let p = init_model(&config(v, true)).unwrap();
        let cfg = PretrainConfig { steps: 1, batch_size: 8, ..Default::default() };
        let out = pretrain_mlm(p, &toy_corpus(32, v as u32), &SPECIALS, &cfg).unwrap();
        let ln_v = (v as f64).ln();
        assert!((out.losses[0] - ln_v).abs() < 0.1 * ln_v, "{} vs {ln_v}", out.losses[0]);
    }

    #[test]
    fn loss_decreases_and_replays_bitwise() {
        let v = 30;
        let data = toy_corpus(200, v as u32);
        let cfg = PretrainConfig { steps: 500, batch_size: 8, learning_rate: 3e-3, ..Default::default() };
        let run = |tied| pretrain_mlm(init_model(&config(v, tied)).unwrap(), &data, &SPECIALS, &cfg).unwrap();
        let a = run(true);
        let head: f64 = a.losses[..50].iter().sum::<f64>() / 50.0;
        let tail: f64 = a.losses[450..].iter().sum::<f64>() / 50.0;
        assert!(tail < head, "first {head} last {tail}");
        let b = run(true);
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.params.checksum(), b.params.checksum());
        let untied = run(false);
        assert!(untied.losses.iter().all(|l| l.is_finite()));
    }

    /// Central differences of the masked cross-entropy against the tape.
    #[test]
    fn mlm_gradients_match_finite_differences() {
        let mut cfg = config(64, true);
        cfg.layers = 2;
        cfg.dropout_p = 0.0;
        let mut params = init_model(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for t in params.tensors_mut() {
            t.mapv_inplace(|x| x * 10.0 + rng.random_range(-0.1..0.1));
        }
        let seqs = vec![SequenceInput::from_ids(&[7, 4, 30, 9]), SequenceInput::from_ids(&[12, 40, 4])];
        let rows = vec![1, 5];
        let labels = vec![22, 51];

        let loss_of = |p: &ModelParams| -> (f64, Vec<Option<Mat>>) {
            let mut g = Graph::new();
            let bound = p.bind(&mut g, true);
            let pass = bound.forward(&mut g, &seqs, None, None).unwrap();
            let h = g.select_rows(pass.last(), rows.clone());
            let logits = bound.mlm_logits(&mut g, h);
            let loss = g.cross_entropy(logits, labels.clone()).unwrap();
            let mut grads = g.backward(loss);
            (g.scalar(loss), bound.vars.iter().map(|&v| grads.take(v)).collect())
        };
        let (_, grads) = loss_of(&params);
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for t in 0..params.tensors().len() {
            let n = params.tensors()[t].len();
            for k in [0, n / 2, n - 1] {
                let analytic = grads[t].as_ref().map_or(0.0, |g| g.as_slice().unwrap()[k]);
                let mut plus = params.clone();
                plus.tensors_mut()[t].as_slice_mut().unwrap()[k] += eps;
                let mut minus = params.clone();
                minus.tensors_mut()[t].as_slice_mut().unwrap()[k] -= eps;
                let numeric = (loss_of(&plus).0 - loss_of(&minus).0) / (2.0 * eps);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
