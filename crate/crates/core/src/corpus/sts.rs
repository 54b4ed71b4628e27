use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::StsPair;

/// Reads `sentence1<TAB>sentence2<TAB>score` lines. Blank lines are skipped.
pub fn parse_sts<R: BufRead>(input: R) -> Result<Vec<StsPair>> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [s1, s2, score] = fields[..] else {
            return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let gold: f64 = score
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("score {score:?} is not a number")))?;
        if !(0.0..=5.0).contains(&gold) {
            return Err(parse_err(format!("score {gold} outside [0, 5]")));
        }
        pairs.push(StsPair { sentence1: s1.to_string(), sentence2: s2.to_string(), gold });
    }
    Ok(pairs)
}

pub fn load_sts(path: impl AsRef<Path>) -> Result<Vec<StsPair>> {
    parse_sts(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_pair() {
        let pairs = parse_sts("a cat.\tthe cat.\t4.6\n".as_bytes()).unwrap();
        assert_eq!(pairs, vec![StsPair { sentence1: "a cat.".into(), sentence2: "the cat.".into(), gold: 4.6 }]);
    }

    #[test]
    fn out_of_range_score() {
        let err = parse_sts("a\tb\t1\nx\ty\t7.0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_sts("a\tb\t1\n\nonly one field\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file() {
        assert!(parse_sts("".as_bytes()).unwrap().is_empty());
    }
}
