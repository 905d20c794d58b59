//! Lexical report-similarity metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn text_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn overlap(cand: &HashMap<&[String], usize>, reference: &HashMap<&[String], usize>) -> usize {
    cand.iter().map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0))).sum()
}

/// BLEU-4 with clipped counts and the brevity penalty.
///
/// Orders longer than the candidate are left out of the geometric mean, so
/// a short candidate identical to its reference scores 1. Without smoothing
/// any order with zero matches yields 0; `smoothing` adds one to numerator
/// and denominator of orders above one.
pub fn bleu(candidate: &str, reference: &str, smoothing: bool) -> f64 {
    let c = text_tokens(candidate);
    let r = text_tokens(reference);
    if c.is_empty() || r.is_empty() {
        return if c == r { 1.0 } else { 0.0 };
    }
    let orders = c.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cg = ngrams(&c, n);
        let total: usize = cg.values().sum();
        let mut matched = overlap(&cg, &ngrams(&r, n)) as f64;
        let mut denom = total as f64;
        if smoothing && n > 1 {
            matched += 1.0;
            denom += 1.0;
        }
        if matched == 0.0 {
            return 0.0;
        }
        log_sum += (matched / denom).ln();
    }
    let bp = if c.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * (log_sum / orders as f64).exp()
}

fn f1(overlap: f64, cand: f64, reference: f64) -> f64 {
    if overlap == 0.0 {
        return 0.0;
    }
    let p = overlap / cand;
    let r = overlap / reference;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F1. When neither text has an n-gram of this order the score is 1
/// for identical token sequences and 0 otherwise.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    let c = text_tokens(candidate);
    let r = text_tokens(reference);
    let cg = ngrams(&c, n);
    let rg = ngrams(&r, n);
    let (ct, rt) = (cg.values().sum::<usize>(), rg.values().sum::<usize>());
    if ct == 0 || rt == 0 {
        return if ct == rt && c == r { 1.0 } else { 0.0 };
    }
    f1(overlap(&cg, &rg) as f64, ct as f64, rt as f64)
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = text_tokens(candidate);
    let r = text_tokens(reference);
    if c.is_empty() || r.is_empty() {
        return if c == r { 1.0 } else { 0.0 };
    }
    f1(lcs_len(&c, &r) as f64, c.len() as f64, r.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

pub fn text_metrics(candidate: &str, reference: &str, smoothing: bool) -> TextMetrics {
    TextMetrics {
        bleu: bleu(candidate, reference, smoothing),
        rouge1: rouge_n(candidate, reference, 1),
        rouge2: rouge_n(candidate, reference, 2),
        rouge_l: rouge_l(candidate, reference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        let t = "The lungs are clear. No focal consolidation.";
        let m = text_metrics(t, t, false);
        assert_eq!((m.bleu, m.rouge1, m.rouge2, m.rouge_l), (1.0, 1.0, 1.0, 1.0));
        let d = text_metrics("alpha beta gamma delta", "one two three four", false);
        assert_eq!((d.bleu, d.rouge1, d.rouge2, d.rouge_l), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge1_partial() {
        let v = rouge_n("the cat sat", "the cat sat down", 1);
        assert!((v - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(lcs_len(&text_tokens("a b c d"), &text_tokens("a c d b")), 3);
    }

    #[test]
    fn bleu_brevity_and_smoothing() {
        // unigram..4gram all match, brevity penalty exp(1 - 5/4)
        let b = bleu("a b c d", "a b c d e", false);
        assert!((b - (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-12);
        assert_eq!(bleu("a b x d e", "a b c d e", false), 0.0);
        assert!(bleu("a b x d e", "a b c d e", true) > 0.0);
    }
}
