use super::vocab::{is_punctuation_char, SubwordConvention, Vocabulary, BEGIN_MARKER, CONTINUATION_MARKER};

/// A whitespace- and punctuation-delimited word. `word_start` is false when
/// the word directly follows the previous one without whitespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Word<'a> {
    pub text: &'a str,
    pub word_start: bool,
}

/// Splits on whitespace and isolates every punctuation character as its own word.
pub fn pretokenize(text: &str) -> Vec<Word<'_>> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    let mut after_space = true;
    let mut pending_start = true;

    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push(Word { text: &text[s..i], word_start: pending_start });
            }
            after_space = true;
        } else if is_punctuation_char(c) {
            if let Some(s) = start.take() {
                words.push(Word { text: &text[s..i], word_start: pending_start });
                after_space = false;
            }
            words.push(Word { text: &text[i..i + c.len_utf8()], word_start: after_space });
            after_space = false;
        } else if start.is_none() {
            start = Some(i);
            pending_start = after_space;
            after_space = false;
        }
    }
    if let Some(s) = start {
        words.push(Word { text: &text[s..], word_start: pending_start });
    }
    words
}

/// Greedy longest-match segmentation. Characters that no vocabulary entry
/// covers become `[UNK]` one at a time.
pub fn tokenize(sentence: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::new();
    for word in pretokenize(sentence) {
        tokenize_word(word, vocab, &mut ids);
    }
    ids
}

/// Like [`tokenize`], lowercasing the input first when asked to.
pub fn tokenize_with_case(sentence: &str, vocab: &Vocabulary, lowercase: bool) -> Vec<u32> {
    if lowercase {
        tokenize(&sentence.to_lowercase(), vocab)
    } else {
        tokenize(sentence, vocab)
    }
}

fn tokenize_word(word: Word<'_>, vocab: &Vocabulary, out: &mut Vec<u32>) {
    let bounds: Vec<usize> = word
        .text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.text.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut candidate = String::new();
    let mut i = 0;
    while i < n {
        let marker = match vocab.convention() {
            SubwordConvention::Continuation if i > 0 => CONTINUATION_MARKER,
            SubwordConvention::BeginMarked if i == 0 && word.word_start => BEGIN_MARKER,
            _ => "",
        };
        let mut matched = None;
        for j in (i + 1..=n).rev() {
            candidate.clear();
            candidate.push_str(marker);
            candidate.push_str(&word.text[bounds[i]..bounds[j]]);
            if let Some(id) = vocab.lookup(&candidate) {
                matched = Some((id, j));
                break;
            }
        }
        match matched {
            Some((id, j)) => {
                out.push(id);
                i = j;
            }
            None => {
                out.push(vocab.specials().unk);
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::{TokenRecord, SPECIAL_SURFACES};

    fn vocab_of(surfaces: &[&str], convention: SubwordConvention) -> Vocabulary {
        let records = SPECIAL_SURFACES
            .iter()
            .chain(surfaces)
            .enumerate()
            .map(|(id, s)| TokenRecord {
                id: id as u32,
                surface: s.to_string(),
                is_subword: false,
                has_uppercase: false,
                is_punctuation: false,
                frequency: 0,
            })
            .collect();
        Vocabulary::from_records(records, convention).unwrap()
    }

    #[test]
    fn pretokenize_splits_punctuation() {
        let words: Vec<_> = pretokenize("Hi, \"there\" now.").into_iter().map(|w| (w.text, w.word_start)).collect();
        assert_eq!(
            words,
            vec![
                ("Hi", true),
                (",", false),
                ("\"", true),
                ("there", false),
                ("\"", false),
                ("now", true),
                (".", false)
            ]
        );
    }

    #[test]
    fn longest_match_wins() {
        let v = vocab_of(&["a", "b", "ab"], SubwordConvention::Continuation);
        assert_eq!(tokenize("ab", &v), vec![v.lookup("ab").unwrap()]);
    }

    #[test]
    fn unmatched_character_becomes_unk() {
        // "abc" against {a, b, ##c}: "abc" and "ab" are absent so "a" is taken;
        // at "b" neither "##bc" nor "##b" exists, so one [UNK]; then "##c".
        let v = vocab_of(&["a", "b", "##c"], SubwordConvention::Continuation);
        let unk = v.specials().unk;
        assert_eq!(tokenize("abc", &v), vec![v.lookup("a").unwrap(), unk, v.lookup("##c").unwrap()]);
    }

    #[test]
    fn empty_input() {
        let v = vocab_of(&["a"], SubwordConvention::Continuation);
        assert!(tokenize("", &v).is_empty());
        assert!(tokenize("   ", &v).is_empty());
    }

    #[test]
    fn begin_marked_segmentation() {
        let v = vocab_of(&["\u{0120}low", "er", "\u{0120}.", "."], SubwordConvention::BeginMarked);
        assert_eq!(
            tokenize("lower .", &v),
            vec![v.lookup("\u{0120}low").unwrap(), v.lookup("er").unwrap(), v.lookup("\u{0120}.").unwrap()]
        );
        assert_eq!(tokenize("low.", &v), vec![v.lookup("\u{0120}low").unwrap(), v.lookup(".").unwrap()]);
    }

    #[test]
    fn lowercase_on_request() {
        let v = vocab_of(&["cat"], SubwordConvention::Continuation);
        let unk = v.specials().unk;
        assert_eq!(tokenize_with_case("Cat", &v, false), vec![unk; 3]);
        assert_eq!(tokenize_with_case("Cat", &v, true), vec![v.lookup("cat").unwrap()]);
    }
}
