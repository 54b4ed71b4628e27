use std::fmt;
use std::fs;
use std::path::Path;

use crate::corpus::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::model::tape::Mat;
use crate::model::{InputToken, SequenceInput};

pub const SENTENCE_SLOT: &str = "[X]";
pub const MASK_SLOT: &str = "[MASK]";
pub const TPL1_MAGIC: &[u8; 4] = b"TPL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Literal(u32),
    Sentence,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateSource {
    Manual,
    Continuous,
}

/// A tokenized pattern with one sentence slot and one mask slot. Continuous
/// templates carry one trainable embedding row per literal token.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    text: String,
    pieces: Vec<Piece>,
    rows: Option<Mat>,
    special_tokens: bool,
    mask_id: u32,
    cls_id: u32,
    sep_id: u32,
}

fn count(text: &str, slot: &'static str) -> Result<()> {
    match text.matches(slot).count() {
        0 => Err(Error::MissingPlaceholder(slot)),
        1 => Ok(()),
        _ => Err(Error::DuplicatePlaceholder(slot)),
    }
}

/// Parses a template string, tokenizing the literal text with `vocab`.
pub fn parse_template(text: &str, vocab: &Vocabulary) -> Result<Template> {
    count(text, SENTENCE_SLOT)?;
    count(text, MASK_SLOT)?;
    let x = text.find(SENTENCE_SLOT).expect("counted");
    let m = text.find(MASK_SLOT).expect("counted");
    let (first, first_piece, first_len, second_piece, second_at, second_len) = if x < m {
        (x, Piece::Sentence, SENTENCE_SLOT.len(), Piece::Mask, m, MASK_SLOT.len())
    } else {
        (m, Piece::Mask, MASK_SLOT.len(), Piece::Sentence, x, SENTENCE_SLOT.len())
    };
    let literal = |s: &str| tokenize(s, vocab).into_iter().map(Piece::Literal);
    let mut pieces: Vec<Piece> = literal(&text[..first]).collect();
    pieces.push(first_piece);
    pieces.extend(literal(&text[first + first_len..second_at]));
    pieces.push(second_piece);
    pieces.extend(literal(&text[second_at + second_len..]));
    let sp = vocab.specials();
    Ok(Template {
        text: text.to_string(),
        pieces,
        rows: None,
        special_tokens: false,
        mask_id: sp.mask,
        cls_id: sp.cls,
        sep_id: sp.sep,
    })
}

/// A rendered prompt: token ids and explicit position ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptEncoding {
    pub input_ids: Vec<u32>,
    pub position_ids: Vec<usize>,
    pub mask_index: usize,
    /// Start and length of the embedded sentence within `input_ids`.
    pub sentence_span: (usize, usize),
    /// Indices of template literal tokens, in template order.
    pub literal_slots: Vec<usize>,
}

impl PromptEncoding {
    pub fn sentence_ids(&self) -> &[u32] {
        let (start, len) = self.sentence_span;
        &self.input_ids[start..start + len]
    }

    /// Encoder input; literal tokens read from the template table when
    /// `continuous` is set.
    pub fn to_sequence(&self, continuous: bool) -> SequenceInput {
        let mut tokens: Vec<InputToken> = self.input_ids.iter().map(|&i| InputToken::Id(i)).collect();
        if continuous {
            for (r, &slot) in self.literal_slots.iter().enumerate() {
                tokens[slot] = InputToken::Extra(r);
            }
        }
        SequenceInput { tokens, positions: self.position_ids.clone() }
    }

    /// Template tokens (everything outside the sentence span) paired with
    /// their position ids.
    pub fn template_positions(&self) -> Vec<(u32, usize)> {
        let (start, len) = self.sentence_span;
        (0..self.input_ids.len())
            .filter(|i| !(start..start + len).contains(i))
            .map(|i| (self.input_ids[i], self.position_ids[i]))
            .collect()
    }
}

impl Template {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn source(&self) -> TemplateSource {
        if self.rows.is_some() {
            TemplateSource::Continuous
        } else {
            TemplateSource::Manual
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.rows.is_some()
    }

    pub fn literal_ids(&self) -> Vec<u32> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Literal(id) => Some(*id),
                _ => None,
            })
            .collect()
    }

    pub fn continuous_rows(&self) -> Option<&Mat> {
        self.rows.as_ref()
    }

    /// The same pattern with trainable rows, one per literal token.
    pub fn with_rows(&self, rows: Mat) -> Result<Self> {
        let literals = self.literal_ids().len();
        if rows.nrows() != literals {
            return Err(Error::DimensionMismatch { expected: literals, found: rows.nrows() });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite template row"));
        }
        Ok(Self { rows: Some(rows), ..self.clone() })
    }

    /// Wraps rendered prompts in [CLS] … [SEP].
    pub fn with_special_tokens(mut self, on: bool) -> Self {
        self.special_tokens = on;
        self
    }

    pub fn has_special_tokens(&self) -> bool {
        self.special_tokens
    }

    /// Number of non-sentence positions in a rendered prompt.
    pub fn overhead(&self) -> usize {
        self.pieces.len() - 1 + if self.special_tokens { 2 } else { 0 }
    }

    /// Longest sentence that fits in `max_positions`.
    pub fn sentence_budget(&self, max_positions: usize) -> Result<usize> {
        max_positions
            .checked_sub(self.overhead())
            .ok_or(Error::PromptTooLong { len: self.overhead(), max: max_positions })
    }

    fn layout(&self, sentence: Option<&[u32]>, sentence_len: usize, max_positions: usize) -> Result<PromptEncoding> {
        let total = self.overhead() + sentence_len;
        if total > max_positions {
            return Err(Error::PromptTooLong { len: total, max: max_positions });
        }
        let mut enc = PromptEncoding {
            input_ids: Vec::with_capacity(total),
            position_ids: Vec::with_capacity(total),
            mask_index: 0,
            sentence_span: (0, 0),
            literal_slots: Vec::new(),
        };
        let mut pos = 0;
        let push = |enc: &mut PromptEncoding, id: u32, pos: &mut usize| {
            enc.input_ids.push(id);
            enc.position_ids.push(*pos);
            *pos += 1;
        };
        if self.special_tokens {
            push(&mut enc, self.cls_id, &mut pos);
        }
        for piece in &self.pieces {
            match *piece {
                Piece::Literal(id) => {
                    enc.literal_slots.push(enc.input_ids.len());
                    push(&mut enc, id, &mut pos);
                }
                Piece::Mask => {
                    enc.mask_index = enc.input_ids.len();
                    push(&mut enc, self.mask_id, &mut pos);
                }
                Piece::Sentence => match sentence {
                    Some(ids) => {
                        enc.sentence_span = (enc.input_ids.len(), ids.len());
                        for &id in ids {
                            push(&mut enc, id, &mut pos);
                        }
                    }
                    None => {
                        enc.sentence_span = (enc.input_ids.len(), 0);
                        pos += sentence_len;
                    }
                },
            }
        }
        if self.special_tokens {
            push(&mut enc, self.sep_id, &mut pos);
        }
        Ok(enc)
    }

    /// Substitutes the sentence into the slot; positions run 0..T−1.
    pub fn render(&self, sentence_ids: &[u32], max_positions: usize) -> Result<PromptEncoding> {
        self.layout(Some(sentence_ids), sentence_ids.len(), max_positions)
    }

    /// The template alone, with every token keeping the position id it has
    /// in the full prompt for a sentence of `sentence_len` tokens.
    pub fn render_bias(&self, sentence_len: usize, max_positions: usize) -> Result<PromptEncoding> {
        self.layout(None, sentence_len, max_positions)
    }

    /// TPL1 bytes: magic, u32 row count, u32 d, rows as f32, then the
    /// u32-length-prefixed UTF-8 template text.
    pub fn to_tpl1(&self) -> Result<Vec<u8>> {
        let rows = self.rows.as_ref().ok_or_else(|| Error::invalid("only continuous templates are saved"))?;
        let mut out = TPL1_MAGIC.to_vec();
        out.extend((rows.nrows() as u32).to_le_bytes());
        out.extend((rows.ncols() as u32).to_le_bytes());
        for &v in rows.iter() {
            out.extend((v as f32).to_le_bytes());
        }
        out.extend((self.text.len() as u32).to_le_bytes());
        out.extend(self.text.as_bytes());
        Ok(out)
    }

    pub fn from_tpl1(bytes: &[u8], vocab: &Vocabulary) -> Result<Self> {
        let short = || Error::format("template file truncated");
        let u32_at = |at: usize| -> Result<usize> {
            let b = bytes.get(at..at + 4).ok_or_else(short)?;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        };
        if bytes.get(..4) != Some(TPL1_MAGIC) {
            return Err(Error::format("missing TPL1 magic"));
        }
        let (n, d) = (u32_at(4)?, u32_at(8)?);
        let end = 12 + n * d * 4;
        let raw = bytes.get(12..end).ok_or_else(short)?;
        let values: Vec<f64> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        let len = u32_at(end)?;
        let text = bytes.get(end + 4..end + 4 + len).ok_or_else(short)?;
        if end + 4 + len != bytes.len() {
            return Err(Error::format("trailing bytes after template"));
        }
        let text = std::str::from_utf8(text).map_err(|_| Error::format("template text is not UTF-8"))?;
        let rows = Mat::from_shape_vec((n, d), values).expect("length checked");
        parse_template(text, vocab)?.with_rows(rows).map_err(|e| Error::format(format!("template rows: {e}")))
    }

    pub fn save_tpl1(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tpl1()?)?;
        Ok(())
    }

    pub fn load_tpl1(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        Self::from_tpl1(&fs::read(path)?, vocab)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
