use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_jsonl, write_jsonl, ArtifactMeta};
use crate::corpus::GeneratedSentence;
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Population statistics (std divides by `n`).
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Token count plus mean/std/min/max of token logits, probabilities and entropies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector13 {
    pub token_count: usize,
    pub logit: Summary,
    pub prob: Summary,
    pub entropy: Summary,
}

impl FeatureVector13 {
    pub fn to_array(&self) -> [f64; NUM_FEATURES] {
        let g = |s: &Summary| [s.mean, s.std, s.min, s.max];
        let (l, p, e) = (g(&self.logit), g(&self.prob), g(&self.entropy));
        [
            self.token_count as f64,
            l[0], l[1], l[2], l[3],
            p[0], p[1], p[2], p[3],
            e[0], e[1], e[2], e[3],
        ]
    }
}

pub fn extract_features(sentence: &GeneratedSentence) -> Result<FeatureVector13> {
    let stats = sentence
        .token_stats
        .as_deref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Feature(format!("sentence `{}` has no token statistics", sentence.text)))?;
    let col = |f: fn(&crate::corpus::TokenStat) -> f64| stats.iter().map(f).collect::<Vec<f64>>();
    Ok(FeatureVector13 {
        token_count: stats.len(),
        logit: Summary::of(&col(|t| t.logit)),
        prob: Summary::of(&col(|t| t.prob)),
        entropy: Summary::of(&col(|t| t.entropy)),
    })
}

/// A row of the features file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub study_id: String,
    pub sentence_index: usize,
    pub features: Vec<f64>,
    pub label: u8,
}

pub fn write_features(path: &Path, meta: &ArtifactMeta, rows: &[FeatureRecord]) -> Result<()> {
    write_jsonl(path, meta, rows)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRecord>> {
    let rows: Vec<(usize, FeatureRecord)> = read_jsonl(path)?;
    rows.into_iter()
        .map(|(line, r)| {
            if r.features.len() != NUM_FEATURES || r.label > 1 {
                return Err(Error::Schema {
                    line,
                    message: format!("expected {NUM_FEATURES} features and a 0/1 label"),
                });
            }
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenStat;

    fn sentence(probs: &[f64]) -> GeneratedSentence {
        GeneratedSentence {
            text: "x".into(),
            token_stats: Some(
                probs
                    .iter()
                    .map(|&p| TokenStat {
                        logit: p.ln(),
                        prob: p,
                        entropy: 1.0 - p,
                    })
                    .collect(),
            ),
        }
    }

    #[test]
    fn hand_values() {
        let f = extract_features(&sentence(&[0.2, 0.8])).unwrap();
        assert!((f.prob.mean - 0.5).abs() < 1e-12 && (f.prob.std - 0.3).abs() < 1e-12);
        assert_eq!((f.prob.min, f.prob.max), (0.2, 0.8));
        let one = extract_features(&sentence(&[0.7])).unwrap();
        assert_eq!(one.token_count, 1);
        assert_eq!((one.logit.std, one.prob.std, one.entropy.std), (0.0, 0.0, 0.0));
        let flat = extract_features(&sentence(&[0.5, 0.5])).unwrap();
        assert_eq!((flat.prob.mean, flat.prob.std, flat.prob.min, flat.prob.max), (0.5, 0.0, 0.5, 0.5));
        assert!(matches!(extract_features(&GeneratedSentence::new("x")), Err(Error::Feature(_))));
    }
}
