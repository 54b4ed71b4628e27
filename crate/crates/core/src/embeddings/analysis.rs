use crate::corpus::{tokenize_with_case, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{norm, spearman};

use super::filter::{resolve_filter, BiasFilterSpec, RemovedTokens};
use super::matrix::EmbeddingMatrix;
use super::SentenceEncoder;

/// Mean of the rows for `ids` that survive `removed`. When every id is
/// filtered out the unfiltered mean is returned instead.
pub fn static_avg_encode(ids: &[u32], matrix: &EmbeddingMatrix, removed: &RemovedTokens) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty token sequence"));
    }
    let kept: Vec<u32> = ids.iter().copied().filter(|&id| !removed.contains(id)).collect();
    let used = if kept.is_empty() { ids } else { &kept[..] };
    let mut sum = vec![0.0f64; matrix.dim()];
    for &id in used {
        if id as usize >= matrix.len() {
            return Err(Error::invalid(format!("token id {id} outside a vocabulary of {}", matrix.len())));
        }
        for (s, &v) in sum.iter_mut().zip(matrix.row(id).iter()) {
            *s += v as f64;
        }
    }
    let n = used.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Sentence encoder averaging static token embeddings, optionally after
/// removing biased tokens.
#[derive(Debug, Clone)]
pub struct StaticAvgEncoder<'a> {
    matrix: &'a EmbeddingMatrix,
    removed: RemovedTokens,
    lowercase: bool,
}

impl<'a> StaticAvgEncoder<'a> {
    pub fn new(matrix: &'a EmbeddingMatrix, filter: &BiasFilterSpec) -> Self {
        Self {
            matrix,
            removed: resolve_filter(matrix.vocab(), filter),
            lowercase: filter.lowercase_input(),
        }
    }

    pub fn removed(&self) -> &RemovedTokens {
        &self.removed
    }
}

impl SentenceEncoder for StaticAvgEncoder<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn encode_batch(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
        sentences
            .iter()
            .map(|s| {
                let ids = tokenize_with_case(s, self.matrix.vocab(), self.lowercase);
                static_avg_encode(&ids, self.matrix, &self.removed)
            })
            .collect()
    }
}

/// Mean cosine over ordered pairs of distinct vectors via the identity
/// `sum_{i != j} cos(u_i, u_j) = |sum_i u_i/|u_i||^2 - n`, as an absolute value.
pub fn mean_pairwise_cosine<'v, I>(vectors: I) -> Result<f64>
where
    I: IntoIterator<Item = &'v [f64]>,
{
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for v in vectors {
        if sum.is_empty() {
            sum = vec![0.0; v.len()];
        } else if v.len() != sum.len() {
            return Err(Error::DimensionMismatch { expected: sum.len(), found: v.len() });
        }
        let len = norm(v);
        if len == 0.0 {
            return Err(Error::UndefinedCosine);
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x / len;
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::invalid("mean pairwise cosine needs at least two vectors"));
    }
    let n = n as f64;
    let total = sum.iter().map(|s| s * s).sum::<f64>() - n;
    Ok((total / (n * n - n)).abs())
}

/// Average cosine similarity between the embeddings of distinct sentences.
pub fn sentence_anisotropy(encoder: &dyn SentenceEncoder, corpus: &Corpus) -> Result<f64> {
    if corpus.len() < 2 {
        return Err(Error::invalid("anisotropy needs at least two sentences"));
    }
    let sentences: Vec<&str> = corpus.sentences().iter().map(String::as_str).collect();
    let vectors = encoder.encode_batch(&sentences)?;
    mean_pairwise_cosine(vectors.iter().map(Vec::as_slice))
}

/// Average cosine similarity between distinct token embedding rows, over
/// all rows or the given subset.
pub fn token_anisotropy(matrix: &EmbeddingMatrix, subset: Option<&[u32]>) -> Result<f64> {
    let ids: Vec<u32> = match subset {
        Some(ids) => ids.to_vec(),
        None => (0..matrix.len() as u32).collect(),
    };
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= matrix.len()) {
        return Err(Error::invalid(format!("token id {bad} outside the matrix")));
    }
    let rows: Vec<Vec<f64>> = ids.iter().map(|&id| matrix.row_f64(id)).collect();
    mean_pairwise_cosine(rows.iter().map(Vec::as_slice))
}

/// Negated Spearman correlation between token frequency and the distance of
/// the token's row from the embedding centroid: positive when frequent tokens
/// sit near the centre.
pub fn frequency_bias_score(matrix: &EmbeddingMatrix, vocab: &Vocabulary) -> Result<f64> {
    if matrix.len() != vocab.len() {
        return Err(Error::DimensionMismatch { expected: vocab.len(), found: matrix.len() });
    }
    if matrix.len() < 3 {
        return Err(Error::invalid("frequency bias needs at least three tokens"));
    }
    let freqs: Vec<f64> = vocab.records().iter().map(|r| r.frequency as f64).collect();
    if freqs.iter().all(|&f| f == freqs[0]) {
        return Err(Error::NoFrequencyVariation);
    }
    let d = matrix.dim();
    let mut centroid = vec![0.0f64; d];
    for row in matrix.rows().rows() {
        for (c, &v) in centroid.iter_mut().zip(row.iter()) {
            *c += v as f64;
        }
    }
    let n = matrix.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    let distances: Vec<f64> = matrix
        .rows()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&centroid)
                .map(|(&v, c)| (v as f64 - c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(-spearman(&freqs, &distances)?)
}
