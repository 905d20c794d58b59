//! Sequential inference with label feedback.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{encode_unlabeled, EncodeLimits};
use super::model::PrmModel;
use super::vocab::label_token;
use crate::artifact::{read_jsonl, write_jsonl, ArtifactMeta};
use crate::corpus::{AblationMask, ClinicalContext};
use crate::error::{Error, Result};

/// Which labels fill the prefix slots of earlier sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// The verifier's own thresholded predictions.
    #[default]
    Greedy,
    /// Provided gold labels (teacher-forced evaluation).
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub threshold: f64,
    pub mask: AblationMask,
    pub limits: EncodeLimits,
    pub feedback: Feedback,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            mask: AblationMask::IDENTITY,
            limits: EncodeLimits::default(),
            feedback: Feedback::Greedy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub study_id: String,
    pub probs: Vec<f64>,
    pub fed_back_labels: Vec<u8>,
    /// Trailing sentences that did not fit and have no probability.
    #[serde(default)]
    pub truncated: usize,
}

impl VerificationResult {
    pub fn predictions(&self, threshold: f64) -> Vec<u8> {
        self.probs.iter().map(|&p| u8::from(p >= threshold)).collect()
    }
}

/// Scores sentence `i` from the prefix `prompt, s_1, y_1, ..., s_i, SEP`,
/// where `y_j` for `j < i` are fed back per `opts.feedback`.
pub fn verify(
    model: &PrmModel,
    ctx: &ClinicalContext,
    sentences: &[String],
    gold: Option<&[u8]>,
    opts: &VerifyOptions,
) -> Result<VerificationResult> {
    if opts.feedback == Feedback::Gold && gold.map_or(true, |g| g.len() != sentences.len()) {
        return Err(Error::Contract("gold feedback needs one label per sentence".into()));
    }
    let mut enc = encode_unlabeled(&model.vocabulary(), ctx, sentences, opts.mask, opts.limits)?;
    let n = enc.num_sentences();
    let mut probs = Vec::with_capacity(n);
    let mut fed = Vec::with_capacity(n);
    for i in 0..n {
        let slot = enc.label_positions[i];
        let p = model.probs_at(&enc.token_ids[..slot], &[slot - 1])?[0];
        let y = match opts.feedback {
            Feedback::Greedy => u8::from(p >= opts.threshold),
            Feedback::Gold => gold.expect("checked above")[i],
        };
        enc.token_ids[slot] = label_token(y);
        probs.push(p);
        fed.push(y);
    }
    Ok(VerificationResult {
        study_id: ctx.study_id.clone(),
        probs,
        fed_back_labels: fed,
        truncated: enc.dropped_sentences,
    })
}

/// One report to verify; `gold` is only read under [`Feedback::Gold`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyItem<'a> {
    pub context: &'a ClinicalContext,
    pub sentences: &'a [String],
    pub gold: Option<&'a [u8]>,
}

/// Data-parallel over reports; output order follows `items`.
pub fn verify_many(model: &PrmModel, items: &[VerifyItem<'_>], opts: &VerifyOptions) -> Result<Vec<VerificationResult>> {
    items
        .par_iter()
        .map(|it| verify(model, it.context, it.sentences, it.gold, opts))
        .collect()
}

pub fn write_verifications(path: &Path, meta: &ArtifactMeta, results: &[VerificationResult]) -> Result<()> {
    write_jsonl(path, meta, results)
}

pub fn read_verifications(path: &Path) -> Result<Vec<VerificationResult>> {
    let rows: Vec<(usize, VerificationResult)> = read_jsonl(path)?;
    rows.into_iter()
        .map(|(line, r)| {
            if r.probs.len() != r.fed_back_labels.len() {
                return Err(Error::Schema {
                    line,
                    message: "probs and fed_back_labels differ in length".into(),
                });
            }
            if r.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Schema {
                    line,
                    message: "probability outside [0, 1]".into(),
                });
            }
            Ok(r)
        })
        .collect()
}
