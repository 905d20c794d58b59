//! Sentence-level classification and ranking metrics, bootstrap intervals,
//! keyword strata, and report-level text and finding metrics.

mod bootstrap;
mod classification;
mod findings;
mod ranking;
mod text;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap, quantile_sorted, BootstrapConfig, ConfidenceInterval};
pub use classification::{classification_metrics, pairs_from, ClassificationMetrics, Confusion, EvalPair};
pub use findings::{
    finding_f1, finding_f1_with, toy_finding_labeler, FindingAverage, FindingEntry, FindingVector, Lexicon,
    DEFAULT_FINDINGS,
};
pub use ranking::{auprc, auroc, ranking_metrics, RankingMetrics};
pub use text::{bleu, lcs_len, rouge_l, rouge_n, text_metrics, text_tokens, TextMetrics};

use crate::artifact::{read_jsonl, write_json, ArtifactMeta};
use crate::error::{Error, Result};

/// Sentence metrics reported for every verifier, in report order.
pub const SENTENCE_METRICS: [&str; 5] = ["accuracy", "f1_macro", "mcc", "auroc", "auprc"];

/// Evaluates one named sentence metric on `pairs`.
pub fn sentence_metric(name: &str, pairs: &[EvalPair], threshold: f64) -> Result<f64> {
    Ok(match name {
        "accuracy" => classification_metrics(pairs, threshold).accuracy,
        "f1_macro" => classification_metrics(pairs, threshold).f1_macro,
        "mcc" => classification_metrics(pairs, threshold).mcc,
        "auroc" => ranking_metrics(pairs)?.auroc,
        "auprc" => ranking_metrics(pairs)?.auprc,
        other => return Err(Error::Config(format!("unknown metric `{other}`"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub seed: u64,
}

impl MetricEntry {
    pub fn from_ci(ci: &ConfidenceInterval, n: usize) -> Self {
        Self {
            point: ci.point,
            lo: ci.lo,
            hi: ci.hi,
            n,
            seed: ci.seed,
        }
    }
}

/// `{metric: {point, lo, hi, n, seed}}`, sorted by metric name.
pub type MetricsReport = BTreeMap<String, MetricEntry>;

/// All [`SENTENCE_METRICS`] with bootstrap intervals.
pub fn sentence_report(pairs: &[EvalPair], threshold: f64, config: BootstrapConfig) -> Result<MetricsReport> {
    let mut out = MetricsReport::new();
    for name in SENTENCE_METRICS {
        let ci = bootstrap(pairs, |d| sentence_metric(name, d, threshold), config)?;
        out.insert(name.to_string(), MetricEntry::from_ci(&ci, pairs.len()));
    }
    Ok(out)
}

pub fn write_metrics_report(path: &Path, meta: &ArtifactMeta, report: &MetricsReport) -> Result<()> {
    write_json(path, meta, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub keyword: String,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_micro: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
}

/// F1-micro (which for one binary label per sentence is accuracy) on the
/// sentences whose text contains `keyword`, case-insensitively.
pub fn keyword_f1_micro(pairs: &[EvalPair], keyword: &str, threshold: f64, config: BootstrapConfig) -> Result<KeywordScore> {
    if keyword.trim().is_empty() {
        return Err(Error::Config("keyword must be non-empty".into()));
    }
    let matching: Vec<EvalPair> = pairs.iter().filter(|p| p.has_keyword(keyword)).cloned().collect();
    if matching.is_empty() {
        return Ok(KeywordScore {
            keyword: keyword.to_string(),
            count: 0,
            f1_micro: None,
            ci: None,
        });
    }
    let ci = bootstrap(&matching, |d| Ok(classification_metrics(d, threshold).accuracy), config)?;
    Ok(KeywordScore {
        keyword: keyword.to_string(),
        count: matching.len(),
        f1_micro: Some(ci.point),
        ci: Some(ci),
    })
}

/// One externally computed per-report score (e.g. BERTScore).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub study_id: String,
    pub metric: String,
    pub value: f64,
}

/// Reads an external-score file into `metric -> study_id -> value`.
pub fn read_external_scores(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let rows: Vec<(usize, ExternalScore)> = read_jsonl(path)?;
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (line, r) in rows {
        if !r.value.is_finite() {
            return Err(Error::Schema {
                line,
                message: "non-finite value".into(),
            });
        }
        out.entry(r.metric).or_default().insert(r.study_id, r.value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_strata() {
        let mut pairs = Vec::new();
        for i in 0..10 {
            let text = if i < 8 { "Small pleural effusion." } else { "Clear lungs." };
            // first 7 matching sentences correct, the 8th wrong
            let label = if i == 7 { 0 } else { 1 };
            pairs.push(EvalPair::new(0.9, label, 0.5).with_text(text));
        }
        pairs[8].label = 0;
        let cfg = BootstrapConfig::default();
        let s = keyword_f1_micro(&pairs, "EFFUSION", 0.5, cfg).unwrap();
        assert_eq!(s.count, 8);
        assert_eq!(s.f1_micro, Some(7.0 / 8.0));
        assert_eq!(keyword_f1_micro(&pairs, "nodule", 0.5, cfg).unwrap().count, 0);
        assert!(keyword_f1_micro(&pairs, " ", 0.5, cfg).is_err());
    }
}
