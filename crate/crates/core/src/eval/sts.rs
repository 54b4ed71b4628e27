use crate::embeddings::SentenceEncoder;
use crate::error::{Error, Result};

use super::metrics::{cosine, spearman};
use super::StsPair;

/// Cosine similarity of each encoded pair.
pub fn predict_similarities(encoder: &dyn SentenceEncoder, pairs: &[StsPair]) -> Result<Vec<f64>> {
    let first: Vec<&str> = pairs.iter().map(|p| p.sentence1.as_str()).collect();
    let second: Vec<&str> = pairs.iter().map(|p| p.sentence2.as_str()).collect();
    let a = encoder.encode_batch(&first)?;
    let b = encoder.encode_batch(&second)?;
    a.iter().zip(&b).map(|(u, v)| cosine(u, v)).collect()
}

/// Spearman correlation between predicted cosines and gold scores.
pub fn eval_sts(encoder: &dyn SentenceEncoder, pairs: &[StsPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no STS pairs to evaluate"));
    }
    spearman(&predict_similarities(encoder, pairs)?, &pairs.iter().map(|p| p.gold).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maps a sentence to (1, x) where x is its leading number.
    struct Angle(f64);

    impl SentenceEncoder for Angle {
        fn dim(&self) -> usize {
            2
        }

        fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
            Ok(sentences.iter().map(|s| vec![self.0, s.parse::<f64>().unwrap()]).collect())
        }
    }

    fn pairs(rows: &[(&str, &str, f64)]) -> Vec<StsPair> {
        rows.iter().map(|&(a, b, g)| StsPair { sentence1: a.into(), sentence2: b.into(), gold: g }).collect()
    }

    #[test]
    fn ordering_matches_gold() {
        let p = pairs(&[("0", "0", 5.0), ("0", "1", 3.0), ("0", "5", 1.0), ("0", "-9", 0.0)]);
        assert!((eval_sts(&Angle(1.0), &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_encoder_is_undefined() {
        let p = pairs(&[("1", "1", 5.0), ("2", "2", 1.0)]);
        assert!(matches!(eval_sts(&Angle(1.0), &p), Err(Error::UndefinedCorrelation)));
        assert!(eval_sts(&Angle(1.0), &[]).is_err());
    }

    #[test]
    fn rescaling_sentences_changes_nothing() {
        struct Scaled;
        impl SentenceEncoder for Scaled {
            fn dim(&self) -> usize {
                2
            }
            fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
                Ok(sentences
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let k = 0.5 + i as f64 * 3.0;
                        vec![k, k * s.parse::<f64>().unwrap()]
                    })
                    .collect())
            }
        }
        let p = pairs(&[("0", "0.2", 5.0), ("0", "1", 3.0), ("0.3", "2", 2.0), ("0", "-9", 0.0), ("1", "-1", 1.0)]);
        assert!((eval_sts(&Scaled, &p).unwrap() - eval_sts(&Angle(1.0), &p).unwrap()).abs() < 1e-12);
    }
}
