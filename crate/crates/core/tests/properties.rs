use std::cell::Cell;
use std::collections::HashMap;

use maskvec::corpus::{build_vocab, tokenize, Corpus, SubwordConvention, Vocabulary};
use maskvec::embeddings::{EmbeddingMatrix, SentenceEncoder};
use maskvec::eval::{eval_sts, StsPair};
use maskvec::prompt::{greedy_template_search, parse_template};
use maskvec::synth::TEMPLATE_SUITE;
use maskvec::training::{contrastive_loss, PairBatch};
use ndarray::Array2;
use proptest::prelude::*;

fn vocab_from(text: &str, convention: SubwordConvention) -> Vocabulary {
    build_vocab(&Corpus::from_text(text), 120, convention).unwrap()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["the", "cat", "Cat", "sat", "on", "mat", "mats", "running", "ran", ",", ".", "!"])
        .prop_map(str::to_string)
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..12).prop_map(|w| w.join(" "))
}

/// Encodes sentence `i` (its text is the index) as a fixed row times a scale.
struct Rows<'a> {
    rows: &'a [Vec<f64>],
    scales: &'a [f64],
}

impl SentenceEncoder for Rows<'_> {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn encode_batch(&self, sentences: &[&str]) -> maskvec::Result<Vec<Vec<f64>>> {
        Ok(sentences
            .iter()
            .map(|s| {
                let i: usize = s.parse().unwrap();
                self.rows[i].iter().map(|x| x * self.scales[i]).collect()
            })
            .collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenize_is_total_deterministic_and_in_range(
        corpus in prop::collection::vec(sentence(), 1..20),
        input in "\\PC{0,40}",
        begin_marked in any::<bool>(),
    ) {
        let convention = if begin_marked { SubwordConvention::BeginMarked } else { SubwordConvention::Continuation };
        let vocab = vocab_from(&corpus.join("\n"), convention);
        let ids = tokenize(&input, &vocab);
        prop_assert_eq!(&ids, &tokenize(&input, &vocab));
        prop_assert!(ids.iter().all(|&id| (id as usize) < vocab.len()));
    }

    #[test]
    fn frequencies_match_a_brute_force_count(corpus in prop::collection::vec(sentence(), 1..40)) {
        let text = corpus.join("\n");
        let vocab = vocab_from(&text, SubwordConvention::Continuation);
        let mut oracle: HashMap<u32, u64> = HashMap::new();
        for line in &corpus {
            for id in tokenize(line, &vocab) {
                *oracle.entry(id).or_default() += 1;
            }
        }
        for (id, &count) in vocab.frequencies().iter().enumerate() {
            prop_assert_eq!(count, oracle.get(&(id as u32)).copied().unwrap_or(0), "id {}", id);
        }
    }

    #[test]
    fn render_round_trips_the_sentence(
        template in prop::sample::select(TEMPLATE_SUITE.to_vec()),
        ids in prop::collection::vec(0u32..50, 0..20),
        specials in any::<bool>(),
    ) {
        let vocab = vocab_from(&format!("{}\nabcdefghijklmnopqrstuvwxyz", TEMPLATE_SUITE.join(" ").replace(['[', ']'], " ")), SubwordConvention::Continuation);
        let t = parse_template(template, &vocab).unwrap().with_special_tokens(specials);
        let rendered = t.render(&ids, 64).unwrap();
        prop_assert_eq!(rendered.sentence_ids(), &ids[..]);
        prop_assert_eq!(rendered.input_ids[rendered.mask_index], vocab.specials().mask);
        prop_assert_eq!(rendered.input_ids.len(), rendered.position_ids.len());
    }

    #[test]
    fn search_scores_each_candidate_once(rels in 1usize..8, prefixes in 1usize..8, seed in any::<u64>()) {
        let rels: Vec<String> = (0..rels).map(|i| format!("r{i}")).collect();
        let prefixes: Vec<String> = (0..prefixes).map(|i| format!("p{i}")).collect();
        let calls = Cell::new(0usize);
        let outcome = greedy_template_search(&rels, &prefixes, |t| {
            calls.set(calls.get() + 1);
            Ok((t.len() as u64).wrapping_mul(seed | 1) as f64 % 97.0)
        })
        .unwrap();
        prop_assert_eq!(calls.get(), rels.len() + prefixes.len());
        prop_assert_eq!(outcome.trace.len(), rels.len() + prefixes.len());
    }

    #[test]
    fn contrastive_loss_ignores_row_scale(
        n in 1usize..8,
        values in prop::collection::vec(-3.0f64..3.0, 2 * 8 * 5),
        scales in prop::collection::vec(0.01f64..100.0, 16),
        tau in 0.02f64..2.0,
    ) {
        let anchors = Array2::from_shape_fn((n, 5), |(i, j)| values[i * 5 + j] + 0.1);
        let positives = Array2::from_shape_fn((n, 5), |(i, j)| values[40 + i * 5 + j] - 0.1);
        let batch = PairBatch { anchors: anchors.clone(), positives: positives.clone() };
        let loss = contrastive_loss(&batch, tau).unwrap();
        prop_assert!(loss >= 0.0);
        let mut scaled = batch.clone();
        for i in 0..n {
            scaled.anchors.row_mut(i).mapv_inplace(|x| x * scales[i]);
            scaled.positives.row_mut(i).mapv_inplace(|x| x * scales[8 + i]);
        }
        prop_assert!((contrastive_loss(&scaled, tau).unwrap() - loss).abs() < 1e-6);
    }

    #[test]
    fn eval_sts_ignores_sentence_scale(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 12),
        scales in prop::collection::vec(0.01f64..100.0, 12),
        golds in prop::collection::vec(0u8..=10, 6),
    ) {
        prop_assume!(rows.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3)));
        let pairs: Vec<StsPair> = golds
            .iter()
            .enumerate()
            .map(|(i, &g)| StsPair { sentence1: (2 * i).to_string(), sentence2: (2 * i + 1).to_string(), gold: g as f64 / 2.0 })
            .collect();
        let ones = vec![1.0; 12];
        let plain = eval_sts(&Rows { rows: &rows, scales: &ones }, &pairs);
        let scaled = eval_sts(&Rows { rows: &rows, scales: &scales }, &pairs);
        match (plain, scaled) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn emb1_round_trip_is_bit_exact(values in prop::collection::vec(-1e3f32..1e3, 1..200)) {
        let vocab = vocab_from("a b c d e f g h", SubwordConvention::Continuation);
        let d = values.len();
        let rows = Array2::from_shape_fn((vocab.len(), d), |(i, j)| if i == 0 { 0.0 } else { values[j] * i as f32 + 0.5 });
        let matrix = EmbeddingMatrix::new(rows, vocab).unwrap();
        let back = EmbeddingMatrix::from_bytes(&matrix.to_bytes()).unwrap();
        prop_assert_eq!(back.rows(), matrix.rows());
        prop_assert_eq!(back.vocab().len(), matrix.vocab().len());
    }
}
