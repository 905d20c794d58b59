use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PCT_GRID: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];

/// One report's score under some scoring method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredReport {
    pub study_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub method: String,
    pub pct: f64,
    pub metric: String,
    pub value: f64,
    pub retained: usize,
}

/// Number of reports dropped at `pct` percent of `k`: `ceil(pct * k / 100)`.
pub fn rejected_count(pct: f64, k: usize) -> usize {
    (pct * k as f64 / 100.0).ceil() as usize
}

/// Study ids kept after rejecting the lowest-scoring `pct` percent, in input
/// order. Ties are broken by study id, the lower id being dropped first.
pub fn retained_ids(scores: &[ScoredReport], pct: f64) -> Result<Vec<&str>> {
    if !(0.0..100.0).contains(&pct) {
        return Err(Error::Config(format!("rejection percentage {pct} outside [0, 100)")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&scores[a], &scores[b]);
        a.score.total_cmp(&b.score).then_with(|| a.study_id.cmp(&b.study_id))
    });
    let mut keep = vec![true; scores.len()];
    for &i in &order[..rejected_count(pct, scores.len())] {
        keep[i] = false;
    }
    Ok(scores
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r.study_id.as_str()))
        .collect())
}

/// Rejection curve with an arbitrary quality function of the retained ids
/// (returning `(metric, value)` pairs in a fixed order).
pub fn reject_with<F>(method: &str, scores: &[ScoredReport], pct_grid: &[f64], quality: F) -> Result<Vec<RejectionRow>>
where
    F: Fn(&[&str]) -> Result<Vec<(String, f64)>>,
{
    let mut rows = Vec::new();
    for &pct in pct_grid {
        let kept = retained_ids(scores, pct)?;
        if kept.is_empty() {
            return Err(Error::Selection(format!(
                "rejecting {pct}% of {} reports leaves none to evaluate",
                scores.len()
            )));
        }
        for (metric, value) in quality(&kept)? {
            rows.push(RejectionRow {
                method: method.to_string(),
                pct,
                metric,
                value,
                retained: kept.len(),
            });
        }
    }
    Ok(rows)
}

/// Rejection curve where each metric is the mean of per-report values
/// (`metric -> study_id -> value`) over the retained set.
pub fn reject(
    method: &str,
    scores: &[ScoredReport],
    quality: &BTreeMap<String, BTreeMap<String, f64>>,
    pct_grid: &[f64],
) -> Result<Vec<RejectionRow>> {
    for (metric, per) in quality {
        if let Some(s) = scores.iter().find(|s| !per.contains_key(&s.study_id)) {
            return Err(Error::Join(format!("{} (no `{metric}` value)", s.study_id)));
        }
    }
    reject_with(method, scores, pct_grid, |kept| {
        Ok(quality
            .iter()
            .map(|(metric, per)| {
                let sum: f64 = kept.iter().map(|id| per[*id]).sum();
                (metric.clone(), sum / kept.len() as f64)
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reports(scores: &[f64]) -> Vec<ScoredReport> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredReport {
                study_id: format!("s{i:02}"),
                score: s,
            })
            .collect()
    }

    #[test]
    fn counts_and_ties() {
        assert_eq!(rejected_count(0.0, 7), 0);
        assert_eq!(rejected_count(10.0, 7), 1);
        assert_eq!(rejected_count(20.0, 10), 2);
        let r = reports(&[0.5, 0.5, 0.1, 0.9]);
        // 25% of 4 drops one: the 0.1; 50% also drops s00 (tie with s01, lower id first)
        assert_eq!(retained_ids(&r, 25.0).unwrap(), vec!["s00", "s01", "s03"]);
        assert_eq!(retained_ids(&reports(&[0.9, 0.1]), 50.0).unwrap(), vec!["s00"]);
        assert_eq!(retained_ids(&r, 50.0).unwrap(), vec!["s01", "s03"]);
        assert!(retained_ids(&r, 100.0).is_err());
        assert!(retained_ids(&r, -1.0).is_err());
    }

    #[test]
    fn mean_quality_curve() {
        let r = reports(&[0.2, 0.8, 0.4, 0.6]);
        let q: BTreeMap<String, BTreeMap<String, f64>> =
            [("f1".to_string(), r.iter().map(|x| (x.study_id.clone(), x.score)).collect())].into();
        let rows = reject("oracle", &r, &q, &[0.0, 25.0, 50.0]).unwrap();
        let v: Vec<f64> = rows.iter().map(|x| x.value).collect();
        for (a, b) in v.iter().zip([0.5, 0.6, 0.7]) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
        assert_eq!(rows[2].retained, 2);
    }

    #[test]
    fn rejecting_everything_is_an_error() {
        let q = BTreeMap::from([("f1".to_string(), BTreeMap::from([("s00".to_string(), 1.0)]))]);
        assert!(reject("m", &reports(&[0.5]), &q, &[0.0]).is_ok());
        assert!(matches!(reject("m", &reports(&[0.5]), &q, &[5.0]), Err(Error::Selection(_))));
    }
}
