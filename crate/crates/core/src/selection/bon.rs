//! Best-of-N selection, plain and finding-group weighted.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aggregate::AggregationMethod;
use crate::error::{Error, Result};
use crate::metrics::FindingVector;

/// Index of the highest score; ties go to the lowest index.
pub fn bon_select(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Selection("empty candidate set".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Selection("NaN candidate score".into()));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub finding_vector: FindingVector,
    /// Member candidate indices, ascending.
    pub members: Vec<usize>,
    pub total_score: f64,
}

/// Groups candidates by identical finding vector, in order of first member.
pub fn group_candidates(scores: &[f64], vectors: &[FindingVector]) -> Result<Vec<CandidateGroup>> {
    if scores.len() != vectors.len() {
        return Err(Error::Selection(format!(
            "{} scores but {} finding vectors",
            scores.len(),
            vectors.len()
        )));
    }
    let mut slot: HashMap<&[u8], usize> = HashMap::new();
    let mut groups: Vec<CandidateGroup> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let g = *slot.entry(v.as_slice()).or_insert_with(|| {
            groups.push(CandidateGroup {
                finding_vector: v.clone(),
                members: Vec::new(),
                total_score: 0.0,
            });
            groups.len() - 1
        });
        groups[g].members.push(i);
        groups[g].total_score += scores[i];
    }
    Ok(groups)
}

/// Picks the group with the largest summed score (ties: the group holding
/// the lowest candidate index), then its best member (ties: lowest index).
pub fn weighted_bon(scores: &[f64], vectors: &[FindingVector]) -> Result<usize> {
    bon_select(scores)?;
    let groups = group_candidates(scores, vectors)?;
    let mut best = 0;
    for (g, group) in groups.iter().enumerate().skip(1) {
        if group.total_score > groups[best].total_score {
            best = g;
        }
    }
    let members = &groups[best].members;
    let within: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
    Ok(members[bon_select(&within)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strategy {
    pub method: AggregationMethod,
    pub weighted: bool,
}

impl Strategy {
    pub fn name(&self) -> String {
        format!("{}{}", if self.weighted { "weighted_" } else { "" }, self.method.name())
    }

    pub fn select(&self, scores: &[f64], vectors: &[FindingVector]) -> Result<usize> {
        if self.weighted {
            weighted_bon(scores, vectors)
        } else {
            bon_select(scores)
        }
    }
}

/// Candidate scores and finding vectors of one study.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSet {
    pub study_id: String,
    pub scores: BTreeMap<AggregationMethod, Vec<f64>>,
    pub findings: Vec<FindingVector>,
}

impl SweepSet {
    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// Selects among `subset` (candidate indices) and returns the original index.
    pub fn select_within(&self, strategy: &Strategy, subset: &[usize]) -> Result<usize> {
        let all = self
            .scores
            .get(&strategy.method)
            .ok_or_else(|| Error::Selection(format!("no `{}` scores for {}", strategy.method, self.study_id)))?;
        let scores: Vec<f64> = subset.iter().map(|&i| all[i]).collect();
        let vectors: Vec<FindingVector> = subset.iter().map(|&i| self.findings[i].clone()).collect();
        Ok(subset[strategy.select(&scores, &vectors)?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Subset {
    /// The first `n` candidates.
    #[default]
    Prefix,
    /// A seeded uniform subsample of size `n`.
    Sample { seed: u64 },
}

fn subset_for(subset: Subset, set_index: usize, total: usize, n: usize) -> Vec<usize> {
    match subset {
        Subset::Prefix => (0..n).collect(),
        Subset::Sample { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            rng.set_stream(set_index as u64);
            let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
            idx.sort_unstable();
            idx
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub strategy: String,
    pub n: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub study_id: String,
    pub strategy: String,
    pub chosen_index: usize,
    pub score: f64,
}

pub const DEFAULT_N_GRID: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

/// For each strategy and each `n`, selects one candidate per set and
/// evaluates the chosen `(set index, candidate index)` pairs. Rows come out
/// in `(strategy, n)` order, then in the order `evaluate` lists metrics.
pub fn bon_sweep<F>(
    sets: &[SweepSet],
    strategies: &[Strategy],
    n_grid: &[usize],
    subset: Subset,
    evaluate: F,
) -> Result<Vec<CurveRow>>
where
    F: Fn(&[(usize, usize)]) -> Result<Vec<(String, f64)>>,
{
    for &n in n_grid {
        if n == 0 {
            return Err(Error::Config("n_grid values must be positive".into()));
        }
        if let Some(s) = sets.iter().find(|s| s.len() < n) {
            return Err(Error::Config(format!(
                "n={n} exceeds the {} candidates of {}",
                s.len(),
                s.study_id
            )));
        }
    }
    let mut rows = Vec::new();
    for strategy in strategies {
        for &n in n_grid {
            let chosen: Vec<(usize, usize)> = sets
                .iter()
                .enumerate()
                .map(|(k, set)| Ok((k, set.select_within(strategy, &subset_for(subset, k, set.len(), n))?)))
                .collect::<Result<_>>()?;
            for (metric, value) in evaluate(&chosen)? {
                rows.push(CurveRow {
                    strategy: strategy.name(),
                    n,
                    metric,
                    value,
                });
            }
        }
    }
    Ok(rows)
}

/// Per-study choice of `strategy` among the first `n` candidates.
pub fn selection_audit(sets: &[SweepSet], strategy: &Strategy, n: usize) -> Result<Vec<SelectionAudit>> {
    sets.iter()
        .map(|set| {
            let subset: Vec<usize> = (0..n.min(set.len())).collect();
            let chosen = set.select_within(strategy, &subset)?;
            Ok(SelectionAudit {
                study_id: set.study_id.clone(),
                strategy: strategy.name(),
                chosen_index: chosen,
                score: set.scores[&strategy.method][chosen],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_bon() {
        assert_eq!(bon_select(&[0.4]).unwrap(), 0);
        assert_eq!(bon_select(&[0.3, 0.7]).unwrap(), 1);
        assert_eq!(bon_select(&[0.5, 0.5]).unwrap(), 0);
        assert!(bon_select(&[]).is_err());
    }

    #[test]
    fn weighted_example() {
        // A(0.9,[1,0]) B(0.8,[1,0]) C(0.95,[0,1])
        let v = vec![vec![1, 0], vec![1, 0], vec![0, 1]];
        assert_eq!(weighted_bon(&[0.9, 0.8, 0.95], &v).unwrap(), 0);
        assert_eq!(bon_select(&[0.9, 0.8, 0.95]).unwrap(), 2);
        let same = vec![vec![1]; 3];
        assert_eq!(weighted_bon(&[0.1, 0.3, 0.2], &same).unwrap(), 1);
        let distinct = vec![vec![0, 0], vec![0, 1], vec![1, 0]];
        assert_eq!(weighted_bon(&[0.1, 0.3, 0.2], &distinct).unwrap(), 1);
    }
}
