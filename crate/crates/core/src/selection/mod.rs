//! Report scoring, percentile rejection and Best-of-N selection.

mod aggregate;
mod bon;
mod reject;

use std::path::Path;

pub use aggregate::{aggregate, AggregationMethod, EntropyPooling, ReportScore, ScoreInputs};
pub use bon::{
    bon_select, bon_sweep, group_candidates, selection_audit, weighted_bon, CandidateGroup, CurveRow, SelectionAudit,
    Strategy, Subset, SweepSet, DEFAULT_N_GRID,
};
pub use reject::{reject, reject_with, rejected_count, retained_ids, RejectionRow, ScoredReport, DEFAULT_PCT_GRID};

use crate::artifact::{csv_bytes, write_atomic, write_jsonl, ArtifactMeta};
use crate::error::Result;

pub fn rejection_csv(meta: &ArtifactMeta, rows: &[RejectionRow]) -> Vec<u8> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.method.clone(), r.pct.to_string(), r.metric.clone(), r.value.to_string()])
        .collect();
    csv_bytes(meta, &["method", "pct", "metric", "value"], &body)
}

pub fn bon_csv(meta: &ArtifactMeta, rows: &[CurveRow]) -> Vec<u8> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.strategy.clone(), r.n.to_string(), r.metric.clone(), r.value.to_string()])
        .collect();
    csv_bytes(meta, &["strategy", "n", "metric", "value"], &body)
}

pub fn write_rejection_csv(path: &Path, meta: &ArtifactMeta, rows: &[RejectionRow]) -> Result<()> {
    write_atomic(path, &rejection_csv(meta, rows))
}

pub fn write_bon_csv(path: &Path, meta: &ArtifactMeta, rows: &[CurveRow]) -> Result<()> {
    write_atomic(path, &bon_csv(meta, rows))
}

pub fn write_selection_audit(path: &Path, meta: &ArtifactMeta, rows: &[SelectionAudit]) -> Result<()> {
    write_jsonl(path, meta, rows)
}
