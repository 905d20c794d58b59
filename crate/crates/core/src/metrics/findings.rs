//! Finding vectors: a rule-based labeler and finding-level F1.

use serde::{Deserialize, Serialize};

use crate::corpus::segment_sentences;
use crate::error::{Error, Result};
use crate::labeling::{negation_parity, normalize};

pub type FindingVector = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingEntry {
    pub name: String,
    pub triggers: Vec<String>,
}

/// Finding classes with their trigger phrases. A sentence that contains a
/// trigger asserts the finding unless it carries an odd number of negation
/// markers (the synthetic oracle's parity rule).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub findings: Vec<FindingEntry>,
}

/// The fourteen classes used by the bundled synthetic corpus.
pub const DEFAULT_FINDINGS: [&str; 14] = [
    "pneumothorax",
    "pleural effusion",
    "consolidation",
    "cardiomegaly",
    "edema",
    "atelectasis",
    "pneumonia",
    "rib fracture",
    "lung nodule",
    "opacity",
    "mediastinal widening",
    "pleural thickening",
    "support device",
    "hernia",
];

impl Lexicon {
    /// One entry per name, triggered by the name itself.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            findings: names
                .iter()
                .map(|n| FindingEntry {
                    name: n.as_ref().to_string(),
                    triggers: vec![n.as_ref().to_string()],
                })
                .collect(),
        }
    }

    pub fn standard() -> Self {
        Self::from_names(&DEFAULT_FINDINGS)
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.findings.iter().position(|f| f.name == name)
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn toy_finding_labeler(report_text: &str, lexicon: &Lexicon) -> Result<FindingVector> {
    if lexicon.is_empty() || lexicon.findings.iter().any(|f| f.triggers.is_empty()) {
        return Err(Error::Config("finding lexicon is empty".into()));
    }
    let triggers: Vec<Vec<Vec<String>>> = lexicon
        .findings
        .iter()
        .map(|f| f.triggers.iter().map(|t| normalize(t)).collect())
        .collect();
    let mut flags = vec![0u8; lexicon.len()];
    for sentence in segment_sentences(report_text) {
        let toks = normalize(&sentence);
        if negation_parity(&toks) {
            continue;
        }
        for (k, ts) in triggers.iter().enumerate() {
            if ts.iter().any(|t| contains_run(&toks, t)) {
                flags[k] = 1;
            }
        }
    }
    Ok(flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingAverage {
    #[default]
    Micro,
    Macro,
}

fn check_shapes(gen: &[FindingVector], gt: &[FindingVector]) -> Result<usize> {
    if gen.len() != gt.len() {
        return Err(Error::Contract(format!("{} generated vs {} reference vectors", gen.len(), gt.len())));
    }
    let width = gt.first().map_or(0, Vec::len);
    if gen.iter().chain(gt).any(|v| v.len() != width) {
        return Err(Error::Contract("finding vectors differ in length".into()));
    }
    Ok(width)
}

fn f1_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let d = 2 * tp + fp + fn_;
    // no positives anywhere: generated agrees with reference
    if d == 0 {
        1.0
    } else {
        2.0 * tp as f64 / d as f64
    }
}

/// Positive-class F1 over all `(report, finding)` cells (micro) or the mean
/// of per-finding F1 (macro).
pub fn finding_f1_with(gen: &[FindingVector], gt: &[FindingVector], avg: FindingAverage) -> Result<f64> {
    let width = check_shapes(gen, gt)?;
    let mut counts = vec![(0u64, 0u64, 0u64); width];
    for (g, t) in gen.iter().zip(gt) {
        for k in 0..width {
            match (g[k] == 1, t[k] == 1) {
                (true, true) => counts[k].0 += 1,
                (true, false) => counts[k].1 += 1,
                (false, true) => counts[k].2 += 1,
                _ => {}
            }
        }
    }
    Ok(match avg {
        FindingAverage::Micro => {
            let (tp, fp, fn_) = counts
                .iter()
                .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
            f1_counts(tp, fp, fn_)
        }
        FindingAverage::Macro => {
            if width == 0 {
                1.0
            } else {
                counts.iter().map(|&(a, b, c)| f1_counts(a, b, c)).sum::<f64>() / width as f64
            }
        }
    })
}

pub fn finding_f1(gen: &[FindingVector], gt: &[FindingVector]) -> Result<f64> {
    finding_f1_with(gen, gt, FindingAverage::Micro)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeler_rules() {
        let lex = Lexicon::standard();
        let k = lex.index_of("pneumothorax").unwrap();
        assert_eq!(toy_finding_labeler("No pneumothorax.", &lex).unwrap()[k], 0);
        assert_eq!(toy_finding_labeler("There is a pneumothorax.", &lex).unwrap()[k], 1);
        assert!(toy_finding_labeler("", &lex).unwrap().iter().all(|&f| f == 0));
        let pe = lex.index_of("pleural effusion").unwrap();
        let v = toy_finding_labeler("Small pleural effusions. No pneumothorax.", &lex).unwrap();
        assert_eq!((v[pe], v[k]), (1, 0));
        assert!(toy_finding_labeler("x", &Lexicon { findings: vec![] }).is_err());
    }

    #[test]
    fn f1_hand_values() {
        let gen = vec![vec![1, 0], vec![1, 1]];
        let gt = vec![vec![1, 1], vec![0, 1]];
        assert!((finding_f1(&gen, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(finding_f1(&gt, &gt).unwrap(), 1.0);
        assert_eq!(finding_f1(&[vec![0, 0]], &[vec![1, 0]]).unwrap(), 0.0);
        assert!(finding_f1(&[vec![0]], &[vec![1, 0]]).is_err());
    }
}
