use serde::{Deserialize, Serialize};

use super::EvalPair;
use crate::error::{Error, Result};

fn class_counts(labels: &[u8]) -> Result<(u64, u64)> {
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos as usize,
            negatives: neg as usize,
        });
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score, stable.
fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs ranked
/// correctly, counting ties as one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract("auroc: scores and labels differ in length".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the number of correctly ordered pairs, in exact integer arithmetic
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let p = idx[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        let n = (j - i) as u128 - p;
        twice += 2 * p * neg_below + p * n;
        neg_below += n;
        i = j;
    }
    Ok(twice as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Average precision with step interpolation over distinct thresholds:
/// `sum_k (R_k - R_{k-1}) * P_k`.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract("auprc: scores and labels differ in length".into()));
    }
    let (pos, _) = class_counts(labels)?;
    let idx = order_desc(scores);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                tp += 1
            } else {
                fp += 1
            }
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub auroc: f64,
    pub auprc: f64,
}

pub fn ranking_metrics(pairs: &[EvalPair]) -> Result<RankingMetrics> {
    let scores: Vec<f64> = pairs.iter().map(|p| p.prob).collect();
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    Ok(RankingMetrics {
        auroc: auroc(&scores, &labels)?,
        auprc: auprc(&scores, &labels)?,
    })
}
