use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prm::EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    MinProb,
    AvgProb,
    ProdProb,
    NegEntropy,
    LogProb,
}

impl AggregationMethod {
    pub const ALL: [AggregationMethod; 5] = [
        AggregationMethod::MinProb,
        AggregationMethod::AvgProb,
        AggregationMethod::ProdProb,
        AggregationMethod::NegEntropy,
        AggregationMethod::LogProb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationMethod::MinProb => "min_prob",
            AggregationMethod::AvgProb => "avg_prob",
            AggregationMethod::ProdProb => "prod_prob",
            AggregationMethod::NegEntropy => "neg_entropy",
            AggregationMethod::LogProb => "log_prob",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether the method reads verifier probabilities.
    pub fn uses_probs(self) -> bool {
        matches!(
            self,
            AggregationMethod::MinProb | AggregationMethod::AvgProb | AggregationMethod::ProdProb
        )
    }
}

impl std::fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How per-token entropies are pooled for [`AggregationMethod::NegEntropy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyPooling {
    /// Mean over sentences of each sentence's mean token entropy.
    #[default]
    SentenceThenReport,
    /// Mean over all tokens of the report.
    FlatTokens,
}

/// Inputs a report score may draw on. Higher scores mean better reports.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreInputs<'a> {
    pub probs: &'a [f64],
    /// Per-sentence token entropies.
    pub token_entropies: Option<&'a [Vec<f64>]>,
    pub log_prob: Option<f64>,
    pub entropy_pooling: EntropyPooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportScore {
    pub study_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_index: Option<usize>,
    pub method: AggregationMethod,
    pub value: f64,
}

pub fn aggregate(method: AggregationMethod, inputs: &ScoreInputs<'_>) -> Result<f64> {
    let need = |missing: &'static str| Error::Aggregation {
        method: method.name(),
        missing,
    };
    let probs = inputs.probs;
    if method.uses_probs() && probs.is_empty() {
        return Err(need("sentence probabilities"));
    }
    Ok(match method {
        AggregationMethod::MinProb => probs.iter().copied().fold(f64::INFINITY, f64::min),
        AggregationMethod::AvgProb => probs.iter().sum::<f64>() / probs.len() as f64,
        AggregationMethod::ProdProb => {
            let mean_log = probs.iter().map(|&p| p.max(EPS).ln()).sum::<f64>() / probs.len() as f64;
            let g = mean_log.exp();
            let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= EPS {
                // exp/ln round-off may step outside [min, mean] by an ulp
                g.clamp(min, probs.iter().sum::<f64>() / probs.len() as f64)
            } else {
                g
            }
        }
        AggregationMethod::NegEntropy => {
            let ents = inputs
                .token_entropies
                .filter(|e| !e.is_empty() && e.iter().all(|s| !s.is_empty()))
                .ok_or_else(|| need("token entropies"))?;
            let pooled = match inputs.entropy_pooling {
                EntropyPooling::SentenceThenReport => {
                    ents.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).sum::<f64>() / ents.len() as f64
                }
                EntropyPooling::FlatTokens => {
                    let n: usize = ents.iter().map(Vec::len).sum();
                    ents.iter().flatten().sum::<f64>() / n as f64
                }
            };
            -pooled
        }
        AggregationMethod::LogProb => inputs.log_prob.ok_or_else(|| need("generator log-probability"))?,
    })
}
