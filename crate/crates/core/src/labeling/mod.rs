//! Weak sentence-correctness labels.
//!
//! A generated sentence is labeled correct (`1`) when at least one
//! ground-truth sentence entails it according to the configured oracle, and
//! hallucinated (`0`) otherwise. The ground-truth sentence is the premise and
//! the generated sentence the hypothesis.

mod remote;
mod synthetic;

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, ArtifactMeta};
use crate::corpus::{GeneratedReport, Study};
use crate::error::{Error, OracleError, Result};

pub use remote::{parse_reply, OracleBackend, OracleConfig, RemoteOracle};
pub use synthetic::{
    content_tokens, negation_parity, normalize, synthetic_oracle, SyntheticOracle,
    NEGATION_MARKERS, STOPWORDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Entailment,
    Neutral,
    Contradiction,
}

impl Relation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "entailment" => Some(Relation::Entailment),
            "neutral" => Some(Relation::Neutral),
            "contradiction" => Some(Relation::Contradiction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentVerdict {
    pub relation: Relation,
    pub confidence: Option<f64>,
}

/// Anything that can judge whether `premise` entails `hypothesis`.
pub trait EntailmentOracle: Sync {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError>;
}

impl<T: EntailmentOracle + ?Sized> EntailmentOracle for &T {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        (**self).judge(premise, hypothesis)
    }
}

impl<T: EntailmentOracle + ?Sized + Send> EntailmentOracle for Box<T> {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        (**self).judge(premise, hypothesis)
    }
}

/// Builds the oracle described by `config`.
pub fn build_oracle(config: &OracleConfig) -> Result<Box<dyn EntailmentOracle + Send>> {
    config.validate()?;
    Ok(match config.backend {
        OracleBackend::Synthetic => Box::new(SyntheticOracle),
        OracleBackend::Remote => Box::new(RemoteOracle::new(config)?),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub study_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entailing_gt_index: Option<usize>,
}

impl LabeledSentence {
    pub fn is_correct(&self) -> bool {
        self.label == 1
    }
}

/// Labels one generated sentence against the ground-truth sentences, stopping
/// at the first entailing sentence.
pub fn label_sentence(
    study_id: &str,
    sentence_index: usize,
    generated: &str,
    gt_sentences: &[String],
    oracle: &dyn EntailmentOracle,
) -> Result<LabeledSentence> {
    if gt_sentences.is_empty() {
        return Err(Error::Contract("label_sentence needs ground-truth sentences".into()));
    }
    let mut entailing = None;
    for (j, gt) in gt_sentences.iter().enumerate() {
        let verdict = oracle
            .judge(gt, generated)
            .map_err(|source| Error::Labeling {
                pair_index: j,
                source,
            })?;
        if verdict.relation == Relation::Entailment {
            entailing = Some(j);
            break;
        }
    }
    Ok(LabeledSentence {
        study_id: study_id.to_string(),
        sentence_index,
        text: generated.to_string(),
        label: u8::from(entailing.is_some()),
        entailing_gt_index: entailing,
    })
}

/// One label per generated sentence, ordered by `(study_id, sentence_index)`.
///
/// Sentences are judged in parallel; output order does not depend on scheduling.
pub fn label_corpus(
    studies: &[Study],
    generated: &[GeneratedReport],
    oracle: &dyn EntailmentOracle,
) -> Result<Vec<LabeledSentence>> {
    let by_id: HashMap<&str, &Study> = studies.iter().map(|s| (s.study_id(), s)).collect();
    let mut jobs = Vec::new();
    for report in generated {
        let study = by_id
            .get(report.study_id.as_str())
            .ok_or_else(|| Error::Join(report.study_id.clone()))?;
        for (i, s) in report.sentences.iter().enumerate() {
            jobs.push((report.study_id.as_str(), i, s.text.as_str(), *study));
        }
    }
    let mut out: Vec<LabeledSentence> = jobs
        .par_iter()
        .map(|&(id, i, text, study)| {
            label_sentence(id, i, text, &study.ground_truth.sentences, oracle)
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| {
        a.study_id
            .cmp(&b.study_id)
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    Ok(out)
}

/// Downsamples the majority class so that `|majority| / |minority| <= target_ratio`.
///
/// The kept majority items are a seeded uniform sample without replacement;
/// the minority class is untouched and output keeps the input order. With
/// equal class sizes the correct class is treated as the majority.
pub fn balance(labels: &[LabeledSentence], target_ratio: f64, seed: u64) -> Result<Vec<LabeledSentence>> {
    if !(target_ratio > 0.0) || !target_ratio.is_finite() {
        return Err(Error::Balance(format!("target_ratio {target_ratio} must be positive")));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].label == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].label != 1).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Balance(format!(
            "both classes required (correct={}, hallucinated={})",
            pos.len(),
            neg.len()
        )));
    }
    let (majority, minority) = if pos.len() >= neg.len() { (&pos, &neg) } else { (&neg, &pos) };
    let cap = (target_ratio * minority.len() as f64 + 1e-9).floor() as usize;
    if majority.len() <= cap {
        return Ok(labels.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; labels.len()];
    for &i in majority {
        keep[i] = false;
    }
    for k in rand::seq::index::sample(&mut rng, majority.len(), cap) {
        keep[majority[k]] = true;
    }
    Ok(labels
        .iter()
        .zip(keep)
        .filter_map(|(l, k)| k.then(|| l.clone()))
        .collect())
}

pub fn write_labels(path: &Path, meta: &ArtifactMeta, labels: &[LabeledSentence]) -> Result<()> {
    artifact::write_jsonl(path, meta, labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabeledSentence>> {
    let recs = artifact::read_jsonl::<LabeledSentence>(path)?;
    let mut out = Vec::with_capacity(recs.len());
    for (line, l) in recs {
        if l.label > 1 {
            return Err(Error::Schema {
                line,
                message: format!("label {} must be 0 or 1", l.label),
            });
        }
        if (l.label == 1) != l.entailing_gt_index.is_some() {
            return Err(Error::Schema {
                line,
                message: "label must be 1 exactly when entailing_gt_index is present".into(),
            });
        }
        out.push(l);
    }
    Ok(out)
}
