use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use unicode_general_category::{get_general_category, GeneralCategory};

use super::tokenizer::{pretokenize, tokenize};
use super::Corpus;
use crate::error::{Error, Result};

pub const CONTINUATION_MARKER: &str = "##";
pub const BEGIN_MARKER: &str = "\u{0120}";

const ASCII_SYMBOLS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// How a vocabulary marks the pieces of a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubwordConvention {
    /// BERT style: pieces after the first carry a `##` prefix.
    Continuation,
    /// RoBERTa style: the first piece of a word carries a `Ġ` prefix.
    BeginMarked,
}

impl SubwordConvention {
    pub fn name(self) -> &'static str {
        match self {
            SubwordConvention::Continuation => "continuation",
            SubwordConvention::BeginMarked => "begin-marked",
        }
    }
}

impl fmt::Display for SubwordConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubwordConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuation" | "wordpiece" => Ok(SubwordConvention::Continuation),
            "begin-marked" | "begin" | "bpe" => Ok(SubwordConvention::BeginMarked),
            other => Err(Error::invalid(format!("unknown subword convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenFlags {
    pub is_subword: bool,
    pub has_uppercase: bool,
    pub is_punctuation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRecord {
    pub id: u32,
    pub surface: String,
    pub is_subword: bool,
    pub has_uppercase: bool,
    pub is_punctuation: bool,
    pub frequency: u64,
}

impl TokenRecord {
    pub fn flags(&self) -> TokenFlags {
        TokenFlags {
            is_subword: self.is_subword,
            has_uppercase: self.has_uppercase,
            is_punctuation: self.is_punctuation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn all(&self) -> [u32; 5] {
        [self.pad, self.unk, self.cls, self.sep, self.mask]
    }
}

/// Special-token surfaces in id order for vocabularies built here.
pub const SPECIAL_SURFACES: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
const ROBERTA_SPECIALS: [&str; 5] = ["<pad>", "<unk>", "<s>", "</s>", "<mask>"];

pub fn is_punctuation_char(c: char) -> bool {
    if c.is_ascii() {
        return ASCII_SYMBOLS.contains(c);
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Strips the convention's marker, returning the bare text and whether the
/// surface denotes a word continuation.
fn split_marker(surface: &str, convention: SubwordConvention) -> (&str, bool) {
    match convention {
        SubwordConvention::Continuation => match surface.strip_prefix(CONTINUATION_MARKER) {
            Some(rest) if !rest.is_empty() => (rest, true),
            _ => (surface, false),
        },
        SubwordConvention::BeginMarked => match surface.strip_prefix(BEGIN_MARKER) {
            Some(rest) if !rest.is_empty() => (rest, false),
            _ => (surface, true),
        },
    }
}

pub fn classify_token(surface: &str, convention: SubwordConvention) -> Result<TokenFlags> {
    if surface.is_empty() {
        return Err(Error::invalid("cannot classify an empty token"));
    }
    let (bare, is_subword) = split_marker(surface, convention);
    Ok(TokenFlags {
        is_subword,
        has_uppercase: bare.chars().any(char::is_uppercase),
        is_punctuation: bare.chars().all(is_punctuation_char),
    })
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    records: Vec<TokenRecord>,
    convention: SubwordConvention,
    specials: SpecialIds,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Assembles a vocabulary from records whose ids must be dense and ordered.
    pub fn from_records(records: Vec<TokenRecord>, convention: SubwordConvention) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (position, record) in records.iter().enumerate() {
            if record.id as usize != position {
                return Err(Error::format(format!(
                    "token ids must be dense: found id {} at row {position}",
                    record.id
                )));
            }
            if record.surface.is_empty() {
                return Err(Error::format(format!("token {position} has an empty surface")));
            }
            if index.insert(record.surface.clone(), record.id).is_some() {
                return Err(Error::format(format!("duplicate surface {:?}", record.surface)));
            }
        }
        let specials = find_specials(&index)?;
        Ok(Self { records, convention, specials, index })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn convention(&self) -> SubwordConvention {
        self.convention
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn records(&self) -> &[TokenRecord] {
        &self.records
    }

    pub fn record(&self, id: u32) -> &TokenRecord {
        &self.records[id as usize]
    }

    pub fn lookup(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> &str {
        &self.records[id as usize].surface
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.specials.all().contains(&id)
    }

    pub fn frequencies(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.frequency).collect()
    }

    /// Replaces every frequency with the token counts of `corpus`.
    pub fn recount(&mut self, corpus: &Corpus) {
        let mut counts = vec![0u64; self.records.len()];
        for sentence in corpus.sentences() {
            for id in tokenize(sentence, self) {
                counts[id as usize] += 1;
            }
        }
        for (record, count) in self.records.iter_mut().zip(counts) {
            record.frequency = count;
        }
    }

    /// Writes the vocabulary as `id<TAB>surface<TAB>frequency<TAB>flags`
    /// lines under a `#convention=` header.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#convention={}", self.convention)?;
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}{}{}",
                r.id,
                r.surface,
                r.frequency,
                u8::from(r.is_subword),
                u8::from(r.has_uppercase),
                u8::from(r.is_punctuation)
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::format("vocabulary file is empty"))??;
        let convention = header
            .trim_end()
            .strip_prefix("#convention=")
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "expected a #convention= header".into(),
            })?
            .parse()?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.is_empty() {
                continue;
            }
            records.push(parse_record(&line).map_err(|message| Error::Parse { line: line_no, message })?);
        }
        Self::from_records(records, convention)
    }
}

fn parse_record(line: &str) -> std::result::Result<TokenRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [id, surface, frequency, flags] = fields[..] else {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    };
    let id = id.parse::<u32>().map_err(|e| format!("bad id {id:?}: {e}"))?;
    let frequency = frequency
        .parse::<u64>()
        .map_err(|e| format!("bad frequency {frequency:?}: {e}"))?;
    let bits: Vec<bool> = flags
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("bad flag digit {other:?}")),
        })
        .collect::<std::result::Result<_, _>>()?;
    let [is_subword, has_uppercase, is_punctuation] = bits[..] else {
        return Err(format!("expected 3 flag digits, found {flags:?}"));
    };
    Ok(TokenRecord {
        id,
        surface: surface.to_string(),
        is_subword,
        has_uppercase,
        is_punctuation,
        frequency,
    })
}

fn find_specials(index: &HashMap<String, u32>) -> Result<SpecialIds> {
    let find = |slot: usize| {
        index
            .get(SPECIAL_SURFACES[slot])
            .or_else(|| index.get(ROBERTA_SPECIALS[slot]))
            .copied()
            .ok_or_else(|| Error::format(format!("vocabulary lacks {}", SPECIAL_SURFACES[slot])))
    };
    Ok(SpecialIds { pad: find(0)?, unk: find(1)?, cls: find(2)?, sep: find(3)?, mask: find(4)? })
}

/// Marks each character of a word with the convention's subword markers.
pub(crate) fn word_symbols(word: &str, word_start: bool, convention: SubwordConvention) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| {
            let mut symbol = String::new();
            match convention {
                SubwordConvention::Continuation if i > 0 => symbol.push_str(CONTINUATION_MARKER),
                SubwordConvention::BeginMarked if i == 0 && word_start => symbol.push_str(BEGIN_MARKER),
                _ => {}
            }
            symbol.push(c);
            symbol
        })
        .collect()
}

fn merge_symbols(left: &str, right: &str, convention: SubwordConvention) -> String {
    match convention {
        SubwordConvention::Continuation => {
            let tail = right.strip_prefix(CONTINUATION_MARKER).unwrap_or(right);
            format!("{left}{tail}")
        }
        SubwordConvention::BeginMarked => format!("{left}{right}"),
    }
}

/// Builds a WordPiece-style vocabulary: the special tokens, every single
/// character unit seen in the corpus, then merged units in order of pair
/// frequency until `max_size` entries exist or nothing is left to merge.
/// Token frequencies are counted by tokenizing the corpus with the result.
pub fn build_vocab(corpus: &Corpus, max_size: usize, convention: SubwordConvention) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut word_counts: BTreeMap<(String, bool), u64> = BTreeMap::new();
    for sentence in corpus.sentences() {
        for word in pretokenize(sentence) {
            *word_counts.entry((word.text.to_string(), word.word_start)).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .map(|((text, start), count)| (word_symbols(&text, start, convention), count))
        .collect();

    let alphabet: BTreeSet<String> = words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let required = SPECIAL_SURFACES.len() + alphabet.len();
    if max_size < required {
        return Err(Error::invalid(format!(
            "max_size {max_size} is below the {required} entries needed for specials and single characters"
        )));
    }

    let mut surfaces: Vec<String> = SPECIAL_SURFACES.iter().map(|s| s.to_string()).collect();
    surfaces.extend(alphabet);
    let mut known: BTreeSet<String> = surfaces.iter().cloned().collect();

    while surfaces.len() < max_size {
        let mut pairs: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pairs.entry((&pair[0], &pair[1])).or_default() += count;
            }
        }
        // Highest count wins; ties go to the lexicographically smallest pair.
        let Some(((left, right), _)) = pairs
            .into_iter()
            .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then_with(|| b.cmp(a)))
        else {
            break;
        };
        let (left, right) = (left.to_string(), right.to_string());
        let merged = merge_symbols(&left, &right, convention);
        for (symbols, _) in &mut words {
            let mut i = 0;
            while i + 1 < symbols.len() {
                if symbols[i] == left && symbols[i + 1] == right {
                    symbols[i] = merged.clone();
                    symbols.remove(i + 1);
                }
                i += 1;
            }
        }
        if known.insert(merged.clone()) {
            surfaces.push(merged);
        }
    }

    let records = surfaces
        .into_iter()
        .enumerate()
        .map(|(id, surface)| {
            let flags = if id < SPECIAL_SURFACES.len() {
                TokenFlags::default()
            } else {
                classify_token(&surface, convention)?
            };
            Ok(TokenRecord {
                id: id as u32,
                surface,
                is_subword: flags.is_subword,
                has_uppercase: flags.has_uppercase,
                is_punctuation: flags.is_punctuation,
                frequency: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut vocab = Vocabulary::from_records(records, convention)?;
    vocab.recount(corpus);
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::new(lines.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn merged_unit_frequency() {
        let vocab = build_vocab(&corpus(&["ab ab", "ab"]), 16, SubwordConvention::Continuation).unwrap();
        let ab = vocab.lookup("ab").expect("ab merged");
        assert_eq!(vocab.record(ab).frequency, 3);
        // "a" and "##b" remain in the vocabulary but are never emitted.
        assert_eq!(vocab.record(vocab.lookup("a").unwrap()).frequency, 0);
        assert!(vocab.lookup("##b").is_some());
    }

    #[test]
    fn single_token_corpus() {
        let vocab = build_vocab(&corpus(&["a"]), 1000, SubwordConvention::Continuation).unwrap();
        assert_eq!(vocab.record(vocab.lookup("a").unwrap()).frequency, 1);
        for surface in SPECIAL_SURFACES {
            assert!(vocab.lookup(surface).is_some(), "{surface}");
        }
        assert_eq!(vocab.len(), 6);
    }

    #[test]
    fn max_size_below_alphabet_is_rejected() {
        let err = build_vocab(&corpus(&["abcdefghij"]), 3, SubwordConvention::Continuation).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty = Corpus::from_text("\n  \n");
        assert!(matches!(
            build_vocab(&empty, 100, SubwordConvention::Continuation),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn classify_examples() {
        let c = SubwordConvention::Continuation;
        let b = SubwordConvention::BeginMarked;
        let f = |s, conv| classify_token(s, conv).unwrap();
        assert_eq!(f("##s", c), TokenFlags { is_subword: true, has_uppercase: false, is_punctuation: false });
        assert_eq!(f("\u{0120}the", b), TokenFlags::default());
        assert_eq!(f(".", c), TokenFlags { is_subword: false, has_uppercase: false, is_punctuation: true });
        assert_eq!(f(".", b), TokenFlags { is_subword: true, has_uppercase: false, is_punctuation: true });
        assert!(f("Paris", c).has_uppercase);
        assert!(f("\u{0120}Paris", b).has_uppercase);
        assert!(f("\u{00bf}", c).is_punctuation);
        assert!(!f("$5", c).is_punctuation);
        assert!(classify_token("", c).is_err());
    }

    #[test]
    fn flags_split_cased_vocab_into_regions() {
        let vocab = build_vocab(
            &corpus(&["The cat sat on the Mat .", "Dogs running quickly , Then stopped !"]),
            60,
            SubwordConvention::Continuation,
        )
        .unwrap();
        let mut regions = BTreeSet::new();
        for r in vocab.records().iter().filter(|r| !vocab.is_special(r.id) && !r.is_punctuation) {
            regions.insert(match (r.is_subword, r.has_uppercase) {
                (true, _) => "subword",
                (false, true) => "upper-begin",
                (false, false) => "lower-begin",
            });
        }
        assert_eq!(regions.len(), 3);
    }

    #[test]
    fn begin_marked_vocab_marks_word_starts() {
        let vocab = build_vocab(&corpus(&["low lower", "low", "low"]), 40, SubwordConvention::BeginMarked).unwrap();
        assert!(vocab.lookup("\u{0120}low").is_some());
        let rec = vocab.record(vocab.lookup("\u{0120}low").unwrap());
        assert!(!rec.is_subword);
        assert_eq!(rec.frequency, 3);
    }

    #[test]
    fn tsv_roundtrip() {
        let vocab = build_vocab(&corpus(&["Hello , world !", "hello again"]), 40, SubwordConvention::Continuation)
            .unwrap();
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        let back = Vocabulary::read_tsv(&buf[..]).unwrap();
        assert_eq!(back.records(), vocab.records());
        assert_eq!(back.convention(), vocab.convention());
        assert_eq!(back.specials(), vocab.specials());
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let text = "#convention=continuation\n0\t[PAD]\t0\t000\n1\t[UNK]\tx\t000\n";
        match Vocabulary::read_tsv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
