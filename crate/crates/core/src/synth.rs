//! Deterministic synthetic data: a paraphrase corpus with graded STS pairs,
//! and a static embedding table whose frequent, subword, capitalized and
//! punctuation tokens carry a shared bias instead of meaning.

use ndarray::{Array1, Array2};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Corpus, SubwordConvention, TokenRecord, Vocabulary, SPECIAL_SURFACES};
use crate::embeddings::EmbeddingMatrix;
use crate::error::Result;
use crate::eval::StsPair;

/// Template strings bundled for alignment checks and default runs.
pub const TEMPLATE_SUITE: [&str; 9] = [
    "[X] [MASK] .",
    "[X] means [MASK] .",
    "[X] is [MASK] .",
    "[MASK] [X]",
    "This sentence of \"[X]\" means [MASK] .",
    "This sentence : \"[X]\" means [MASK] .",
    "This sentence : '[X]' means [MASK] .",
    "The sentence \"[X]\" is about [MASK] .",
    "[MASK] , in other words : [X] .",
];

pub const RELATIONSHIP_CANDIDATES: [&str; 5] = ["", "means", "is", "is about", "says"];

pub const PREFIX_CANDIDATES: [&str; 4] =
    ["[X]", "\"[X]\"", "This sentence : \"[X]\"", "This sentence of \"[X]\""];

const SUBJECTS: [&str; 12] =
    ["cat", "dog", "farmer", "teacher", "child", "doctor", "bird", "horse", "pilot", "artist", "baker", "sailor"];
const VERBS: [&str; 10] = ["eats", "sees", "paints", "carries", "finds", "buys", "likes", "cleans", "moves", "draws"];
const OBJECTS: [&str; 12] =
    ["apple", "house", "boat", "letter", "garden", "bottle", "window", "basket", "table", "ladder", "wagon", "lamp"];
const ADJECTIVES: [&str; 2] = ["small", "old"];
const ADVERBS: [&str; 2] = ["quietly", "often"];
const TAILS: [&str; 2] = ["today", "again"];
const MODIFIER_P: f64 = 0.4;

/// Held-out partition of subject–verb–object combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Concept {
    subject: usize,
    verb: usize,
    object: usize,
}

impl Concept {
    fn index(self) -> usize {
        (self.subject * VERBS.len() + self.verb) * OBJECTS.len() + self.object
    }

    fn split(self) -> Split {
        // A multiplicative hash spreads the split over all three slots.
        match (self.index() * 7 + 3) % 5 {
            0 => Split::Test,
            1 => Split::Dev,
            _ => Split::Train,
        }
    }

    fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            subject: rng.random_range(0..SUBJECTS.len()),
            verb: rng.random_range(0..VERBS.len()),
            object: rng.random_range(0..OBJECTS.len()),
        }
    }

    fn random_in<R: Rng>(split: Split, rng: &mut R) -> Self {
        loop {
            let c = Self::random(rng);
            if c.split() == split {
                return c;
            }
        }
    }

    fn shared(self, other: Concept) -> usize {
        (self.subject == other.subject) as usize + (self.verb == other.verb) as usize + (self.object == other.object) as usize
    }
}

fn maybe<'a, R: Rng>(rng: &mut R, p: f64, pool: &[&'a str]) -> Option<&'a str> {
    if rng.random::<f64>() < p {
        pool.choose(rng).copied()
    } else {
        None
    }
}

/// One surface form: optional modifiers make paraphrases differ in length.
fn realize<R: Rng>(c: Concept, rng: &mut R) -> String {
    let mut words = vec!["the"];
    words.extend(maybe(rng, MODIFIER_P, &ADJECTIVES));
    words.push(SUBJECTS[c.subject]);
    words.extend(maybe(rng, MODIFIER_P, &ADVERBS));
    words.push(VERBS[c.verb]);
    words.push("the");
    words.extend(maybe(rng, MODIFIER_P, &ADJECTIVES));
    words.push(OBJECTS[c.object]);
    words.extend(maybe(rng, MODIFIER_P, &TAILS));
    words.push(".");
    words.join(" ")
}

/// `n` training sentences drawn from the training combinations.
pub fn paraphrase_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| realize(Concept::random_in(Split::Train, &mut rng), &mut rng)).collect()
}

/// Graded pairs from one split: gold is 5/3 per shared slot, with the
/// number of shared slots drawn uniformly from 0..=3.
pub fn paraphrase_sts(n: usize, split: Split, seed: u64) -> Vec<StsPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = Concept::random_in(split, &mut rng);
            let want = rng.random_range(0..=3);
            let b = loop {
                let b = Concept::random_in(split, &mut rng);
                let b = if want == 3 { a } else { b };
                if b.shared(a) == want {
                    break b;
                }
            };
            StsPair { sentence1: realize(a, &mut rng), sentence2: realize(b, &mut rng), gold: want as f64 * 5.0 / 3.0 }
        })
        .collect()
}

/// Text used to build the paraphrase vocabulary: the corpus plus every
/// bundled template so template words become whole tokens.
pub fn vocabulary_text(corpus: &Corpus) -> Corpus {
    let extra = TEMPLATE_SUITE.iter().map(|t| t.replace("[X]", " ").replace("[MASK]", " "));
    corpus.sentences().iter().cloned().chain(extra).collect()
}

const FUNCTION_WORDS: [&str; 36] = [
    "the", "a", "an", "of", "to", "in", "on", "at", "is", "was", "and", "or", "but", "with", "for", "from", "by", "as",
    "it", "this", "that", "these", "those", "be", "been", "are", "were", "has", "have", "had", "do", "does", "did",
    "not", "so", "very",
];
const BIASED_SUBJECTS: [&str; 24] = [
    "lion", "tiger", "zebra", "camel", "whale", "shark", "eagle", "raven", "otter", "moose", "bison", "lemur", "koala",
    "panda", "gecko", "heron", "llama", "hyena", "rhino", "sloth", "viper", "mole", "crane", "dingo",
];
const BIASED_VERBS: [&str; 24] = [
    "jump", "climb", "swim", "hunt", "guard", "watch", "chase", "greet", "fetch", "shake", "build", "carve", "paint",
    "visit", "clean", "lift", "push", "pull", "throw", "catch", "kick", "hold", "wash", "fold",
];
const BIASED_OBJECTS: [&str; 24] = [
    "river", "forest", "castle", "bridge", "tower", "valley", "island", "desert", "meadow", "harbor", "temple",
    "garden", "canyon", "glacier", "market", "village", "cottage", "chapel", "quarry", "orchard", "lagoon", "summit",
    "prairie", "tunnel",
];
const OFFSET: f64 = 0.5;
const SPREAD: f64 = 2.0;
const SUFFIXES: [&str; 8] = ["s", "ed", "ing", "er", "ly", "ful", "ness", "ish"];
const PUNCTUATION: [&str; 5] = [",", ";", "!", "?", ":"];

/// The bias-ablation world: an embedding table plus STS sets whose
/// sentences mix content words with biased tokens.
#[derive(Debug, Clone)]
pub struct BiasedWorld {
    pub matrix: EmbeddingMatrix,
    pub sts: Vec<(String, Vec<StsPair>)>,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn biased_sentence<R: Rng>(words: [&str; 3], rng: &mut R) -> String {
    let mut out: Vec<String> = Vec::new();
    for w in words {
        let mut w = w.to_string();
        if rng.random::<f64>() < 0.3 {
            w.push_str(SUFFIXES.choose(rng).expect("non-empty"));
        }
        if rng.random::<f64>() < 0.3 {
            w = capitalize(&w);
        }
        out.push(w);
    }
    for _ in 0..7 {
        let at = rng.random_range(0..=out.len());
        out.insert(at, FUNCTION_WORDS.choose(rng).expect("non-empty").to_string());
    }
    if rng.random::<f64>() < 0.5 {
        let at = rng.random_range(1..=out.len());
        out.insert(at, PUNCTUATION.choose(rng).expect("non-empty").to_string());
    }
    out.join(" ")
}

fn biased_concept<R: Rng>(rng: &mut R) -> [usize; 3] {
    [
        rng.random_range(0..BIASED_SUBJECTS.len()),
        rng.random_range(0..BIASED_VERBS.len()),
        rng.random_range(0..BIASED_OBJECTS.len()),
    ]
}

fn biased_words(c: [usize; 3]) -> [&'static str; 3] {
    [BIASED_SUBJECTS[c[0]], BIASED_VERBS[c[1]], BIASED_OBJECTS[c[2]]]
}

fn biased_sts<R: Rng>(n: usize, rng: &mut R) -> Vec<StsPair> {
    (0..n)
        .map(|_| {
            let a = biased_concept(rng);
            let want = rng.random_range(0..=3);
            let b = loop {
                let b = if want == 3 { a } else { biased_concept(rng) };
                if (0..3).filter(|&i| a[i] == b[i]).count() == want {
                    break b;
                }
            };
            StsPair {
                sentence1: biased_sentence(biased_words(a), rng),
                sentence2: biased_sentence(biased_words(b), rng),
                gold: want as f64 * 5.0 / 3.0,
            }
        })
        .collect()
}

/// Builds the biased world: content words get independent Gaussian rows;
/// function words, suffix pieces, capitalized variants and punctuation get
/// a shared offset plus noise. Frequencies come from a background corpus.
pub fn biased_world(dim: usize, pairs_per_set: usize, seed: u64) -> Result<BiasedWorld> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content: Vec<&str> = BIASED_SUBJECTS.iter().chain(&BIASED_VERBS).chain(&BIASED_OBJECTS).copied().collect();

    let mut surfaces: Vec<String> = SPECIAL_SURFACES.iter().map(|s| s.to_string()).collect();
    let mut biased: Vec<bool> = vec![false; surfaces.len()];
    let mut groups: Vec<(String, bool)> = FUNCTION_WORDS.iter().map(|w| (w.to_string(), true)).collect();
    groups.extend(content.iter().map(|w| (w.to_string(), false)));
    groups.extend(content.iter().map(|w| (capitalize(w), true)));
    groups.extend(SUFFIXES.iter().map(|s| (format!("##{s}"), true)));
    groups.extend(PUNCTUATION.iter().map(|p| (p.to_string(), true)));
    // Single characters keep every input tokenizable.
    let letters: std::collections::BTreeSet<char> =
        groups.iter().flat_map(|(s, _)| s.trim_start_matches("##").chars().collect::<Vec<_>>()).collect();
    for c in letters {
        for s in [c.to_string(), format!("##{c}")] {
            if !groups.iter().any(|(g, _)| *g == s) {
                groups.push((s, true));
            }
        }
    }
    for (s, b) in groups {
        surfaces.push(s);
        biased.push(b);
    }

    let records = surfaces
        .iter()
        .enumerate()
        .map(|(id, s)| -> Result<TokenRecord> {
            let flags = if id < SPECIAL_SURFACES.len() {
                Default::default()
            } else {
                crate::corpus::classify_token(s, SubwordConvention::Continuation)?
            };
            Ok(TokenRecord {
                id: id as u32,
                surface: s.clone(),
                is_subword: flags.is_subword,
                has_uppercase: flags.has_uppercase,
                is_punctuation: flags.is_punctuation,
                frequency: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut vocab = Vocabulary::from_records(records, SubwordConvention::Continuation)?;
    let background: Corpus = (0..3000).map(|_| biased_sentence(biased_words(biased_concept(&mut rng)), &mut rng)).collect();
    vocab.recount(&background);

    let offset: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut rows = Array2::<f32>::zeros((vocab.len(), dim));
    for (id, &is_biased) in biased.iter().enumerate() {
        for j in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let v = if id < SPECIAL_SURFACES.len() {
                0.1 * noise
            } else if is_biased {
                OFFSET * offset[j] + SPREAD * noise
            } else {
                noise
            };
            rows[[id, j]] = v as f32;
        }
    }
    let matrix = EmbeddingMatrix::new(rows, vocab)?;
    let sts = (1..=3).map(|i| (format!("synth-{i}"), biased_sts(pairs_per_set, &mut rng))).collect();
    Ok(BiasedWorld { matrix, sts })
}
