//! Deterministic lexical entailment rule used as a stand-in oracle.
//!
//! Both texts are normalized (lowercase, punctuation stripped, plural `s`
//! stemmed). The hypothesis is entailed when its content tokens are a subset
//! of the premise tokens and both texts carry the same parity of negation
//! markers; subset with mismatched parity is a contradiction; anything else
//! is neutral. This is a test double, not a model of clinical NLI.

use std::collections::HashSet;

use super::{EntailmentOracle, EntailmentVerdict, Relation};
use crate::error::OracleError;

pub const NEGATION_MARKERS: [&str; 4] = ["no", "not", "without", "negative"];

/// Function words ignored on the hypothesis side of the subset test.
pub const STOPWORDS: [&str; 14] = [
    "a", "an", "the", "there", "is", "are", "of", "present", "seen", "noted", "evidence",
    "identified", "be", "to",
];

fn stem(token: &str) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

/// Lowercases, strips punctuation and stems plural `s`.
pub fn normalize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(stem)
        .collect()
}

pub fn is_negation(token: &str) -> bool {
    NEGATION_MARKERS.contains(&token)
}

pub fn negation_parity(tokens: &[String]) -> bool {
    tokens.iter().filter(|t| is_negation(t)).count() % 2 == 1
}

/// Tokens that carry content: not a negation marker and not a stopword.
pub fn content_tokens(tokens: &[String]) -> Vec<&str> {
    tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !is_negation(t) && !STOPWORDS.contains(t))
        .collect()
}

pub fn synthetic_oracle(premise: &str, hypothesis: &str) -> EntailmentVerdict {
    let p = normalize(premise);
    let h = normalize(hypothesis);
    let premise_set: HashSet<&str> = p.iter().map(String::as_str).collect();
    let subset = content_tokens(&h).iter().all(|t| premise_set.contains(t));
    let relation = if !subset {
        Relation::Neutral
    } else if negation_parity(&p) == negation_parity(&h) {
        Relation::Entailment
    } else {
        Relation::Contradiction
    };
    EntailmentVerdict {
        relation,
        confidence: None,
    }
}

/// [`synthetic_oracle`] behind the oracle trait.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticOracle;

impl EntailmentOracle for SyntheticOracle {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        Ok(synthetic_oracle(premise, hypothesis))
    }
}
