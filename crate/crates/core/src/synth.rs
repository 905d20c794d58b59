//! Seeded synthetic corpus with planted, learnable hallucination structure.
//!
//! Each study mentions a few findings from the lexicon, each present or
//! absent. The ground truth states every mentioned finding ("There is X." or
//! "No X."), so a faithful generated sentence is always entailed. A corrupted
//! sentence either flips the polarity of a mentioned finding or swaps in a
//! finding the study never mentions; the synthetic oracle labels both 0.
//!
//! Planted signal, all scaled by `plant_strength`:
//! - studies are "routine" or "limited"; the TECHNIQUE field names the kind,
//!   and limited studies are corrupted more often;
//! - some corrupted sentences use hedged wording ("may be present");
//! - token statistics of corrupted sentences have lower probability and
//!   higher entropy;
//! - token embeddings carry the label along a fixed direction.

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::TokenEmbeddingSequence;
use crate::corpus::{
    CandidateSet, ClinicalContext, GeneratedReport, GeneratedSentence, GroundTruthReport, Study, TokenStat,
};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_FINDINGS;

pub const PREAMBLE: &str = "Provide a description of the findings in the radiology study.";

const ROUTINE_TECHNIQUE: [&str; 3] = [
    "PA and lateral views of the chest.",
    "Frontal and lateral chest radiographs.",
    "Upright PA and lateral chest radiographs.",
];
const LIMITED_TECHNIQUE: [&str; 3] = [
    "Portable AP view of the chest, limited by rotation.",
    "Single portable supine radiograph, limited exam.",
    "Bedside AP radiograph, limited by motion.",
];
const PATIENTS: [&str; 6] = [
    "Middle-aged man",
    "Elderly woman",
    "Young man",
    "Woman",
    "Man",
    "Elderly man",
];
const SYMPTOMS: [&str; 6] = [
    "with cough",
    "with shortness of breath",
    "with chest pain",
    "with fever",
    "after a fall",
    "for preoperative assessment",
];
const COMPARISONS: [&str; 4] = [
    "None.",
    "Not applicable.",
    "Prior radiograph from one week earlier.",
    "Chest radiograph of the previous day.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_studies: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Marginal probability that a generated sentence is corrupted.
    pub hallucination_rate: f64,
    /// In [0, 1]; 0 removes every planted cue, 1 makes them strongest.
    pub plant_strength: f64,
    /// Best-of-N candidates per study; 0 skips candidate generation.
    pub candidates_per_study: usize,
    pub embedding_dim: usize,
    pub findings: Vec<String>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_studies: 200,
            min_sentences: 3,
            max_sentences: 6,
            hallucination_rate: 0.5,
            plant_strength: 0.9,
            candidates_per_study: 8,
            embedding_dim: 32,
            findings: DEFAULT_FINDINGS.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.num_studies == 0 {
            return Err(Error::Config("num_studies must be at least 1".into()));
        }
        if !unit(self.hallucination_rate) || !unit(self.plant_strength) {
            return Err(Error::Config("hallucination_rate and plant_strength must lie in [0, 1]".into()));
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err(Error::Config("need 1 <= min_sentences <= max_sentences".into()));
        }
        if self.max_sentences >= self.findings.len() {
            return Err(Error::Config(
                "max_sentences must be below the number of findings (entity swaps need an unmentioned finding)".into(),
            ));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub studies: Vec<Study>,
    pub generated: Vec<GeneratedReport>,
    pub candidates: Vec<CandidateSet>,
    /// One embedding sequence per generated sentence, in report order.
    pub embeddings: Vec<TokenEmbeddingSequence>,
    /// Generator-side truth: `corrupted[k][i]` for generated report `k`.
    pub corrupted: Vec<Vec<bool>>,
    /// Whether each study is of the limited (more error-prone) kind.
    pub limited: Vec<bool>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn positive(f: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => format!("There is {f}."),
        1 => format!("{} is present.", capitalize(f)),
        _ => format!("{} is seen.", capitalize(f)),
    }
}

fn negative(f: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => format!("No {f}."),
        1 => format!("No evidence of {f}."),
        _ => format!("There is no {f}."),
    }
}

fn hedged(f: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..2) {
        0 => format!("{} may be present.", capitalize(f)),
        _ => format!("Possible {f}."),
    }
}

struct Plan<'a> {
    mentioned: &'a [usize],
    present: &'a [bool],
    findings: &'a [String],
}

/// Writes one report over the mentioned findings in a shuffled order.
fn write_report(plan: &Plan<'_>, rate: f64, strength: f64, rng: &mut ChaCha8Rng) -> (Vec<GeneratedSentence>, Vec<bool>) {
    let mut order: Vec<usize> = (0..plan.mentioned.len()).collect();
    order.shuffle(rng);
    let mut sentences = Vec::with_capacity(order.len());
    let mut flags = Vec::with_capacity(order.len());
    for k in order {
        let f = &plan.findings[plan.mentioned[k]];
        let present = plan.present[k];
        let corrupt = rng.random_bool(rate);
        let text = if !corrupt {
            if present {
                positive(f, rng)
            } else {
                negative(f, rng)
            }
        } else if rng.random_bool(0.5 * strength) {
            hedged(f, rng)
        } else if rng.random_bool(0.5) {
            // polarity flip
            if present {
                negative(f, rng)
            } else {
                positive(f, rng)
            }
        } else {
            // swap in an unmentioned finding
            let others: Vec<usize> = (0..plan.findings.len()).filter(|i| !plan.mentioned.contains(i)).collect();
            let g = &plan.findings[*others.choose(rng).expect("validated: unmentioned finding exists")];
            if rng.random_bool(0.5) {
                positive(g, rng)
            } else {
                negative(g, rng)
            }
        };
        let stats = token_stats(&text, corrupt, strength, rng);
        sentences.push(GeneratedSentence {
            text,
            token_stats: Some(stats),
        });
        flags.push(corrupt);
    }
    (sentences, flags)
}

fn token_stats(text: &str, corrupt: bool, strength: f64, rng: &mut ChaCha8Rng) -> Vec<TokenStat> {
    let n = text.split_whitespace().count().max(1);
    let center = if corrupt { 0.5 - 0.1 * strength } else { 0.5 + 0.4 * strength };
    (0..n)
        .map(|_| {
            let prob: f64 = (center + rng.random_range(-0.25..0.25)).clamp(0.01, 0.999);
            let h = -(prob * prob.ln() + (1.0 - prob) * (1.0 - prob).ln());
            TokenStat {
                logit: (prob / (1.0 - prob)).ln() + rng.random_range(-0.5..0.5),
                prob,
                entropy: h + rng.random_range(0.0..0.2),
            }
        })
        .collect()
}

fn log_prob(sentences: &[GeneratedSentence]) -> f64 {
    sentences
        .iter()
        .flat_map(|s| s.token_stats.iter().flatten())
        .map(|t| t.prob.ln())
        .sum()
}

fn embedding(rows: usize, direction: &[f64], correct: bool, strength: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let sign = if correct { strength } else { -strength };
    Array2::from_shape_fn((rows, direction.len()), |(_, j)| {
        let z: f64 = StandardNormal.sample(rng);
        z + sign * direction[j]
    })
}

struct StudyOut {
    study: Study,
    report: GeneratedReport,
    candidates: Option<CandidateSet>,
    embeddings: Vec<TokenEmbeddingSequence>,
    corrupted: Vec<bool>,
    limited: bool,
}

fn make_study(spec: &SyntheticSpec, index: usize, direction: &[f64]) -> StudyOut {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let study_id = format!("study-{index:05}");
    let r = spec.hallucination_rate;
    let spread = spec.plant_strength * r.min(1.0 - r);
    let limited = rng.random_bool(0.5);
    let rate = if limited { r + spread } else { r - spread };

    let m = rng.random_range(spec.min_sentences..=spec.max_sentences);
    let mentioned: Vec<usize> = rand::seq::index::sample(&mut rng, spec.findings.len(), m).into_vec();
    let present: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
    let plan = Plan {
        mentioned: &mentioned,
        present: &present,
        findings: &spec.findings,
    };

    let technique = if limited {
        LIMITED_TECHNIQUE.choose(&mut rng)
    } else {
        ROUTINE_TECHNIQUE.choose(&mut rng)
    }
    .expect("non-empty pool");
    let context = ClinicalContext {
        study_id: study_id.clone(),
        preamble: PREAMBLE.to_string(),
        indication: format!(
            "{} {}.",
            PATIENTS.choose(&mut rng).expect("pool"),
            SYMPTOMS.choose(&mut rng).expect("pool")
        ),
        technique: technique.to_string(),
        comparison: COMPARISONS.choose(&mut rng).expect("pool").to_string(),
    };
    let gt_sentences = mentioned
        .iter()
        .zip(&present)
        .map(|(&f, &p)| {
            let name = &spec.findings[f];
            if p {
                format!("There is {name}.")
            } else {
                format!("No {name}.")
            }
        })
        .collect();

    let (sentences, corrupted) = write_report(&plan, rate, spec.plant_strength, &mut rng);
    let embeddings = sentences
        .iter()
        .zip(&corrupted)
        .enumerate()
        .map(|(i, (s, &c))| TokenEmbeddingSequence {
            study_id: study_id.clone(),
            sentence_index: i,
            vectors: embedding(
                s.token_stats.as_ref().map_or(1, Vec::len),
                direction,
                !c,
                spec.plant_strength,
                &mut rng,
            ),
        })
        .collect();
    let report = GeneratedReport {
        study_id: study_id.clone(),
        generator_id: "synthetic".into(),
        log_prob: Some(log_prob(&sentences)),
        sentences,
    };

    let candidates = (spec.candidates_per_study > 0).then(|| {
        let cands = (0..spec.candidates_per_study)
            .map(|_| {
                let cand_rate = rng.random_range(0.0..=1.0) * (2.0 * rate).min(1.0);
                let (sentences, _) = write_report(&plan, cand_rate, spec.plant_strength, &mut rng);
                GeneratedReport {
                    study_id: study_id.clone(),
                    generator_id: "synthetic-candidate".into(),
                    log_prob: Some(log_prob(&sentences)),
                    sentences,
                }
            })
            .collect();
        CandidateSet {
            study_id: study_id.clone(),
            candidates: cands,
        }
    });

    StudyOut {
        study: Study {
            context,
            ground_truth: GroundTruthReport {
                study_id,
                sentences: gt_sentences,
            },
        },
        report,
        candidates,
        embeddings,
        corrupted,
        limited,
    }
}

/// Builds the corpus; each study draws from its own stream of the seed, so
/// the output is identical regardless of thread count.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut direction: Vec<f64> = (0..spec.embedding_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    direction.iter_mut().for_each(|x| *x /= norm);

    let outs: Vec<StudyOut> = (0..spec.num_studies)
        .into_par_iter()
        .map(|i| make_study(spec, i, &direction))
        .collect();
    let mut corpus = SyntheticCorpus {
        studies: Vec::with_capacity(outs.len()),
        generated: Vec::with_capacity(outs.len()),
        candidates: Vec::new(),
        embeddings: Vec::new(),
        corrupted: Vec::with_capacity(outs.len()),
        limited: Vec::with_capacity(outs.len()),
    };
    for o in outs {
        corpus.studies.push(o.study);
        corpus.generated.push(o.report);
        corpus.candidates.extend(o.candidates);
        corpus.embeddings.extend(o.embeddings);
        corpus.corrupted.push(o.corrupted);
        corpus.limited.push(o.limited);
    }
    Ok(corpus)
}
