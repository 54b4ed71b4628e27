//! Browser bindings for three interactive views of the toolkit: the PCA
//! layout of a biased embedding table, the bias-filter ladder and the
//! contrastive loss as a function of temperature.

use std::fmt::Write;
use std::sync::OnceLock;

use maskvec::embeddings::{pca_2d, resolve_filter, BiasFilterSpec, CaseMode};
use maskvec::eval::{cumulative_ladder, run_bias_ablation};
use maskvec::synth::{biased_world, BiasedWorld};
use maskvec::training::{contrastive_loss, PairBatch};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

fn world() -> Result<&'static BiasedWorld, String> {
    static WORLD: OnceLock<Result<BiasedWorld, String>> = OnceLock::new();
    WORLD.get_or_init(|| biased_world(64, 500, 7).map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

/// `token x y frequent subword uppercase punctuation` rows for the biased table.
pub fn pca_tsv(top_freq: usize) -> Result<String, String> {
    let world = world()?;
    let pca = pca_2d(&world.matrix).map_err(|e| e.to_string())?;
    let vocab = world.matrix.vocab();
    let frequent = resolve_filter(vocab, &BiasFilterSpec { top_freq_count: top_freq, ..BiasFilterSpec::NONE });
    let mut out = String::from("token\tx\ty\tfrequent\tsubword\tuppercase\tpunctuation\n");
    for (r, xy) in vocab.records().iter().zip(pca.coordinates.rows()) {
        if vocab.is_special(r.id) {
            continue;
        }
        let _ = writeln!(
            out,
            "{}\t{:.5}\t{:.5}\t{}\t{}\t{}\t{}",
            r.surface,
            xy[0],
            xy[1],
            u8::from(frequent.contains(r.id)),
            u8::from(r.is_subword),
            u8::from(r.has_uppercase),
            u8::from(r.is_punctuation),
        );
    }
    Ok(out)
}

/// Cumulative ladder report on the biased table's STS sets.
pub fn ladder_tsv(top_freq: usize, drop_uppercase: bool) -> Result<String, String> {
    let world = world()?;
    let case = if drop_uppercase { CaseMode::DropUppercase } else { CaseMode::LowercaseInput };
    let report = run_bias_ablation(&world.matrix, &world.sts, &cumulative_ladder(top_freq, case)).map_err(|e| e.to_string())?;
    Ok(report.to_tsv())
}

/// `temperature loss shuffled_loss` over a log grid for a batch of noisy
/// positive pairs; the shuffled column pairs each anchor with its neighbour's
/// positive.
pub fn loss_curve_tsv(batch: usize, dim: usize, noise: f64, seed: u64) -> Result<String, String> {
    if batch == 0 || dim == 0 || !(noise >= 0.0) {
        return Err("batch and dim must be positive and noise non-negative".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let anchors = Array2::from_shape_simple_fn((batch, dim), &mut normal);
    let positives = &anchors + &Array2::from_shape_simple_fn((batch, dim), &mut normal).mapv(|x| x * noise);
    let shuffled = Array2::from_shape_fn((batch, dim), |(i, j)| positives[[(i + 1) % batch, j]]);
    let aligned = PairBatch { anchors: anchors.clone(), positives };
    let misaligned = PairBatch { anchors, positives: shuffled };
    let mut out = String::from("temperature\tloss\tshuffled_loss\n");
    for step in 0..=40 {
        let tau = 10f64.powf(-2.0 + 3.0 * step as f64 / 40.0);
        let a = contrastive_loss(&aligned, tau).map_err(|e| e.to_string())?;
        let b = contrastive_loss(&misaligned, tau).map_err(|e| e.to_string())?;
        let _ = writeln!(out, "{tau:.5}\t{a:.6}\t{b:.6}");
    }
    Ok(out)
}

#[wasm_bindgen(js_name = pcaView)]
pub fn pca_view(top_freq: usize) -> Result<String, JsValue> {
    pca_tsv(top_freq).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = biasLadder)]
pub fn bias_ladder(top_freq: usize, drop_uppercase: bool) -> Result<String, JsValue> {
    ladder_tsv(top_freq, drop_uppercase).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = lossCurve)]
pub fn loss_curve(batch: usize, dim: usize, noise: f64, seed: u64) -> Result<String, JsValue> {
    loss_curve_tsv(batch, dim, noise, seed).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(tsv: &str, index: usize) -> Vec<f64> {
        tsv.lines().skip(1).map(|l| l.split('\t').nth(index).unwrap().parse().unwrap()).collect()
    }

    #[test]
    fn pca_lists_every_ordinary_token() {
        let tsv = pca_tsv(36).unwrap();
        let vocab = world().unwrap().matrix.vocab();
        let specials = vocab.records().iter().filter(|r| vocab.is_special(r.id)).count();
        assert_eq!(tsv.lines().count() - 1, vocab.len() - specials);
        assert_eq!(column(&tsv, 3).iter().sum::<f64>(), 36.0);
    }

    #[test]
    fn ladder_rises() {
        let avg = column(&ladder_tsv(36, false).unwrap(), 4);
        assert_eq!(avg.len(), 5);
        assert!(avg.windows(2).all(|w| w[1] > w[0]), "{avg:?}");
    }

    #[test]
    fn aligned_pairs_beat_shuffled_ones() {
        let tsv = loss_curve_tsv(16, 8, 0.3, 0).unwrap();
        let (aligned, shuffled) = (column(&tsv, 1), column(&tsv, 2));
        assert_eq!(aligned.len(), 41);
        assert!(aligned.iter().zip(&shuffled).all(|(a, s)| a < s));
        let ln_n = 16f64.ln();
        assert!((aligned[40] - ln_n).abs() < 0.1, "high temperature approaches ln N");
        assert!(loss_curve_tsv(0, 8, 0.3, 0).is_err());
    }
}
