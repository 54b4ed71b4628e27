use crate::error::{Error, Result};

use super::template::SENTENCE_SLOT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStage {
    Relationship,
    Prefix,
}

impl SearchStage {
    pub fn name(self) -> &'static str {
        match self {
            SearchStage::Relationship => "relationship",
            SearchStage::Prefix => "prefix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub stage: SearchStage,
    pub candidate: String,
    pub template: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: String,
    pub best_score: f64,
    pub trace: Vec<SearchStep>,
}

/// `"[X] <rel> [MASK] ."`, collapsing an empty relationship.
pub fn relationship_template(rel: &str) -> String {
    let rel = rel.trim();
    if rel.is_empty() {
        "[X] [MASK] .".to_string()
    } else {
        format!("[X] {rel} [MASK] .")
    }
}

/// Wraps the sentence slot of `template`. A wrapper without its own
/// sentence slot is treated as a prefix.
pub fn wrap_template(template: &str, wrapper: &str) -> String {
    let wrapper = if wrapper.contains(SENTENCE_SLOT) {
        wrapper.to_string()
    } else {
        format!("{} {SENTENCE_SLOT}", wrapper.trim())
    };
    template.replacen(SENTENCE_SLOT, &wrapper, 1)
}

/// Two-stage greedy search: the best relationship phrase first, then the
/// best wrapper around the winner's sentence slot. Ties keep the earlier
/// candidate. Calls `scorer` exactly `|rel| + |prefix|` times.
pub fn greedy_template_search<F>(relationships: &[String], prefixes: &[String], mut scorer: F) -> Result<SearchOutcome>
where
    F: FnMut(&str) -> Result<f64>,
{
    if relationships.is_empty() || prefixes.is_empty() {
        return Err(Error::invalid("both candidate lists must be non-empty"));
    }
    let mut trace = Vec::with_capacity(relationships.len() + prefixes.len());
    let mut run = |stage, candidates: Vec<(String, String)>, trace: &mut Vec<SearchStep>| -> Result<(String, f64)> {
        let mut best: Option<(String, f64)> = None;
        for (candidate, template) in candidates {
            let score = scorer(&template)
                .map_err(|e| Error::Candidate { candidate: candidate.clone(), source: Box::new(e) })?;
            if best.as_ref().is_none_or(|(_, s)| score > *s) {
                best = Some((template.clone(), score));
            }
            trace.push(SearchStep { stage, candidate, template, score });
        }
        Ok(best.expect("non-empty"))
    };
    let stage1 = relationships.iter().map(|r| (r.clone(), relationship_template(r))).collect();
    let (winner, _) = run(SearchStage::Relationship, stage1, &mut trace)?;
    let stage2 = prefixes.iter().map(|p| (p.clone(), wrap_template(&winner, p))).collect();
    let (best, best_score) = run(SearchStage::Prefix, stage2, &mut trace)?;
    Ok(SearchOutcome { best, best_score, trace })
}
