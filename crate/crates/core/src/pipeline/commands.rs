use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Verifier};
use super::report::{collect_report_inputs, emit_report};
use super::{split_of, Layout, Split};
use crate::artifact::{csv_bytes, read_json_body, write_atomic, write_json, write_jsonl, ArtifactMeta};
use crate::baselines::{
    extract_features, read_embeddings, train_attn, train_mlp, write_embeddings, write_features, AttnModel,
    FeatureRecord, MlpModel, NUM_FEATURES,
};
use crate::corpus::{
    read_candidates, read_generated, read_studies, write_candidates, write_generated, write_studies, AblationMask,
    ClinicalContext, GeneratedReport, Study,
};
use crate::error::{Error, Result};
use crate::labeling::{balance, build_oracle, label_corpus, read_labels, write_labels, LabeledSentence};
use crate::metrics::{
    finding_f1, keyword_f1_micro, sentence_report, text_metrics, toy_finding_labeler, write_metrics_report,
    EvalPair, FindingVector, Lexicon, MetricEntry, MetricsReport, SENTENCE_METRICS,
};
use crate::prm::{
    build_examples, load_checkpoint, save_checkpoint, train, verify_many, write_verifications, read_verifications,
    Feedback, PrmDataset, PrmModel, VerificationResult, VerifyItem, VerifyOptions,
};
use crate::selection::{
    aggregate, bon_sweep, reject_with, selection_audit, write_bon_csv, write_rejection_csv, write_selection_audit,
    AggregationMethod, ScoreInputs, ScoredReport, Strategy, SweepSet,
};
use crate::synth::make_synthetic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Label,
    Balance,
    TrainPrm,
    TrainMlp,
    TrainAttn,
    Verify(Verifier),
    Eval(Verifier),
    Reject,
    Bon,
    Ablate,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Label => "label",
            Command::Balance => "balance",
            Command::TrainPrm => "train-prm",
            Command::TrainMlp => "train-mlp",
            Command::TrainAttn => "train-attn",
            Command::Verify(_) => "verify",
            Command::Eval(_) => "eval",
            Command::Reject => "reject",
            Command::Bon => "bon",
            Command::Ablate => "ablate",
            Command::Report => "report",
        }
    }
}

/// Validates `config` and runs one command; returns the artifacts written.
pub fn run(command: Command, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let ctx = Ctx {
        cfg: config,
        layout: Layout::new(&config.paths),
        meta: config.meta(),
    };
    match command {
        Command::Synth => ctx.synth(),
        Command::Label => ctx.label(),
        Command::Balance => ctx.balance(),
        Command::TrainPrm => ctx.train_prm(),
        Command::TrainMlp => ctx.train_mlp(),
        Command::TrainAttn => ctx.train_attn(),
        Command::Verify(v) => ctx.verify(v),
        Command::Eval(v) => ctx.eval(v),
        Command::Reject => ctx.reject(),
        Command::Bon => ctx.bon(),
        Command::Ablate => ctx.ablate(),
        Command::Report => ctx.report(),
    }
}

/// One row of the context-ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub variant: String,
    pub metrics: MetricsReport,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// Joins verifier outputs with gold labels. With `retained`, only those
/// `(study_id, sentence_index)` keys are scored.
pub fn eval_pairs(
    results: &[VerificationResult],
    labels: &[LabeledSentence],
    retained: Option<&[LabeledSentence]>,
    threshold: f64,
) -> Result<Vec<EvalPair>> {
    let gold: HashMap<(&str, usize), &LabeledSentence> =
        labels.iter().map(|l| ((l.study_id.as_str(), l.sentence_index), l)).collect();
    let keep: Option<HashSet<(&str, usize)>> =
        retained.map(|r| r.iter().map(|l| (l.study_id.as_str(), l.sentence_index)).collect());
    let mut out = Vec::new();
    for r in results {
        for (i, &p) in r.probs.iter().enumerate() {
            let key = (r.study_id.as_str(), i);
            if keep.as_ref().is_some_and(|k| !k.contains(&key)) {
                continue;
            }
            let l = gold
                .get(&key)
                .ok_or_else(|| Error::Join(format!("{} sentence {i} has no label", r.study_id)))?;
            out.push(EvalPair::new(p, l.label, threshold).with_text(l.text.clone()));
        }
    }
    if out.is_empty() {
        return Err(Error::Contract("no labeled sentences to evaluate".into()));
    }
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    layout: Layout,
    meta: ArtifactMeta,
}

fn in_split<'r>(reports: &'r [GeneratedReport], split: Split) -> Vec<&'r GeneratedReport> {
    reports.iter().filter(|r| split_of(&r.study_id) == split).collect()
}

fn contexts(studies: &[Study]) -> HashMap<&str, &Study> {
    studies.iter().map(|s| (s.study_id(), s)).collect()
}

fn texts(report: &GeneratedReport) -> Vec<String> {
    report.sentences.iter().map(|s| s.text.clone()).collect()
}

/// Per-sentence token entropies when every sentence carries statistics.
fn token_entropies(report: &GeneratedReport) -> Option<Vec<Vec<f64>>> {
    report
        .sentences
        .iter()
        .map(|s| s.token_stats.as_ref().map(|t| t.iter().map(|x| x.entropy).collect()))
        .collect()
}

fn features_of(report: &GeneratedReport) -> Result<Vec<[f64; NUM_FEATURES]>> {
    report
        .sentences
        .iter()
        .map(|s| Ok(extract_features(s)?.to_array()))
        .collect()
}

/// Per-report quality used by rejection and Best-of-N curves.
struct Quality {
    findings: FindingVector,
    reference: FindingVector,
    bleu: f64,
    rouge_l: f64,
}

fn quality_metrics(items: &[&Quality]) -> Result<Vec<(String, f64)>> {
    let gen: Vec<FindingVector> = items.iter().map(|q| q.findings.clone()).collect();
    let gt: Vec<FindingVector> = items.iter().map(|q| q.reference.clone()).collect();
    let n = items.len().max(1) as f64;
    Ok(vec![
        ("finding_f1".to_string(), finding_f1(&gen, &gt)?),
        ("bleu".to_string(), items.iter().map(|q| q.bleu).sum::<f64>() / n),
        ("rouge_l".to_string(), items.iter().map(|q| q.rouge_l).sum::<f64>() / n),
    ])
}

impl Ctx<'_> {
    fn lexicon(&self) -> Lexicon {
        Lexicon::from_names(&self.cfg.synth.findings)
    }

    fn quality(&self, report: &GeneratedReport, study: &Study) -> Result<Quality> {
        let lex = self.lexicon();
        let text = report.full_text();
        let reference = study.ground_truth.sentences.join(" ");
        let tm = text_metrics(&text, &reference, self.cfg.selection.bleu_smoothing);
        Ok(Quality {
            findings: toy_finding_labeler(&text, &lex)?,
            reference: toy_finding_labeler(&reference, &lex)?,
            bleu: tm.bleu,
            rouge_l: tm.rouge_l,
        })
    }

    fn verify_options(&self, mask: AblationMask) -> VerifyOptions {
        VerifyOptions {
            threshold: self.cfg.eval.threshold,
            mask,
            limits: self.cfg.prm.train.limits(),
            feedback: self.cfg.eval.feedback,
        }
    }

    fn synth(&self) -> Result<Vec<PathBuf>> {
        let c = make_synthetic(&self.cfg.synth)?;
        let l = &self.layout;
        write_studies(&l.studies(), &self.meta, &c.studies)?;
        write_generated(&l.generated(), &self.meta, &c.generated)?;
        write_candidates(&l.candidates(), &self.meta, &c.candidates)?;
        write_embeddings(&l.embeddings(), &self.meta, &c.embeddings)?;
        Ok(vec![l.studies(), l.generated(), l.candidates(), l.embeddings()])
    }

    fn label(&self) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let generated = read_generated(&self.layout.generated())?;
        let oracle = build_oracle(&self.cfg.oracle)?;
        let labels = label_corpus(&studies, &generated, &*oracle)?;
        write_labels(&self.layout.labels(), &self.meta, &labels)?;
        Ok(vec![self.layout.labels()])
    }

    fn balance(&self) -> Result<Vec<PathBuf>> {
        let labels = read_labels(&self.layout.labels())?;
        let kept = balance(&labels, self.cfg.balance.ratio, self.cfg.seeds.balance())?;
        write_labels(&self.layout.balanced(), &self.meta, &kept)?;
        Ok(vec![self.layout.balanced()])
    }

    fn train_prm(&self) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let generated = read_generated(&self.layout.generated())?;
        let labels = read_labels(&self.layout.labels())?;
        let kept = read_labels(&self.layout.balanced())?;
        let examples = build_examples(&studies, &generated, &labels, Some(&kept))?;
        let mut ds = PrmDataset::default();
        for e in examples {
            match split_of(e.study_id()) {
                Split::Train => ds.train.push(e),
                Split::Validation => ds.validation.push(e),
                Split::Test => {}
            }
        }
        let (model, history) = train(self.cfg.prm.arch, &ds, &self.cfg.prm.train)?;
        save_checkpoint(&model, &self.layout.prm_checkpoint(), Some(&self.meta))?;
        write_jsonl(&self.layout.prm_history(), &self.meta, &history.records)?;
        Ok(vec![self.layout.prm_checkpoint(), self.layout.prm_history()])
    }

    fn train_mlp(&self) -> Result<Vec<PathBuf>> {
        let generated = read_generated(&self.layout.generated())?;
        let kept = read_labels(&self.layout.balanced())?;
        let by_id: HashMap<&str, &GeneratedReport> = generated.iter().map(|r| (r.study_id.as_str(), r)).collect();
        let mut rows = Vec::with_capacity(kept.len());
        for l in &kept {
            let sentence = by_id
                .get(l.study_id.as_str())
                .and_then(|r| r.sentences.get(l.sentence_index))
                .ok_or_else(|| Error::Join(format!("{} sentence {}", l.study_id, l.sentence_index)))?;
            rows.push(FeatureRecord {
                study_id: l.study_id.clone(),
                sentence_index: l.sentence_index,
                features: extract_features(sentence)?.to_array().to_vec(),
                label: l.label,
            });
        }
        let train_rows: Vec<&FeatureRecord> = rows.iter().filter(|r| split_of(&r.study_id) == Split::Train).collect();
        let x: Vec<[f64; NUM_FEATURES]> =
            train_rows.iter().map(|r| r.features.as_slice().try_into().expect("13 features")).collect();
        let y: Vec<u8> = train_rows.iter().map(|r| r.label).collect();
        let model = train_mlp(&x, &y, &self.cfg.mlp)?;
        write_features(&self.layout.features(), &self.meta, &rows)?;
        write_json(&self.layout.mlp(), &self.meta, &model)?;
        Ok(vec![self.layout.features(), self.layout.mlp()])
    }

    fn embedding_index(&self) -> Result<HashMap<(String, usize), Array2<f64>>> {
        Ok(read_embeddings(&self.layout.embeddings())?
            .into_iter()
            .map(|s| ((s.study_id, s.sentence_index), s.vectors))
            .collect())
    }

    fn train_attn(&self) -> Result<Vec<PathBuf>> {
        let emb = self.embedding_index()?;
        let kept = read_labels(&self.layout.balanced())?;
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for l in &kept {
            let seq = emb
                .get(&(l.study_id.clone(), l.sentence_index))
                .ok_or_else(|| Error::Feature(format!("no embeddings for {} sentence {}", l.study_id, l.sentence_index)))?;
            match split_of(&l.study_id) {
                Split::Train => {
                    tx.push(seq.clone());
                    ty.push(l.label);
                }
                Split::Validation => {
                    vx.push(seq.clone());
                    vy.push(l.label);
                }
                Split::Test => {}
            }
        }
        let (model, history) = train_attn(&tx, &ty, &vx, &vy, &self.cfg.attn)?;
        write_json(&self.layout.attn(), &self.meta, &model)?;
        write_jsonl(&self.layout.attn_history(), &self.meta, &history.epochs)?;
        Ok(vec![self.layout.attn(), self.layout.attn_history()])
    }

    fn prm_verify(
        &self,
        model: &PrmModel,
        studies: &[Study],
        reports: &[&GeneratedReport],
        mask: AblationMask,
    ) -> Result<Vec<VerificationResult>> {
        let ctx = contexts(studies);
        let gold: Option<HashMap<(String, usize), u8>> = match self.cfg.eval.feedback {
            Feedback::Greedy => None,
            Feedback::Gold => Some(
                read_labels(&self.layout.labels())?
                    .into_iter()
                    .map(|l| ((l.study_id, l.sentence_index), l.label))
                    .collect(),
            ),
        };
        let sentences: Vec<Vec<String>> = reports.iter().map(|r| texts(r)).collect();
        let mut golds: Vec<Option<Vec<u8>>> = Vec::with_capacity(reports.len());
        let mut ctxs: Vec<&ClinicalContext> = Vec::with_capacity(reports.len());
        for r in reports {
            let s = ctx.get(r.study_id.as_str()).ok_or_else(|| Error::Join(r.study_id.clone()))?;
            ctxs.push(&s.context);
            golds.push(match &gold {
                None => None,
                Some(g) => Some(
                    (0..r.sentences.len())
                        .map(|i| {
                            g.get(&(r.study_id.clone(), i))
                                .copied()
                                .ok_or_else(|| Error::Join(format!("{} sentence {i} has no label", r.study_id)))
                        })
                        .collect::<Result<_>>()?,
                ),
            });
        }
        let items: Vec<VerifyItem<'_>> = (0..reports.len())
            .map(|k| VerifyItem {
                context: ctxs[k],
                sentences: &sentences[k],
                gold: golds[k].as_deref(),
            })
            .collect();
        verify_many(model, &items, &self.verify_options(mask))
    }

    fn from_probs(&self, study_id: &str, probs: Vec<f64>) -> VerificationResult {
        let th = self.cfg.eval.threshold;
        VerificationResult {
            study_id: study_id.to_string(),
            fed_back_labels: probs.iter().map(|&p| u8::from(p >= th)).collect(),
            probs,
            truncated: 0,
        }
    }

    fn mlp_verify(&self, model: &MlpModel, reports: &[&GeneratedReport]) -> Result<Vec<VerificationResult>> {
        reports
            .iter()
            .map(|r| Ok(self.from_probs(&r.study_id, model.predict(&features_of(r)?))))
            .collect()
    }

    fn verify(&self, v: Verifier) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let generated = read_generated(&self.layout.generated())?;
        let test = in_split(&generated, Split::Test);
        let mask = self.cfg.ablation.mask;
        let results = match v {
            Verifier::Prm => {
                let model = load_checkpoint(&self.layout.prm_checkpoint())?;
                self.prm_verify(&model, &studies, &test, mask)?
            }
            Verifier::Mlp => {
                let (_, model): (_, MlpModel) = read_json_body(&self.layout.mlp())?;
                self.mlp_verify(&model, &test)?
            }
            Verifier::Attn => {
                let (_, model): (_, AttnModel) = read_json_body(&self.layout.attn())?;
                let emb = self.embedding_index()?;
                let mut out = Vec::with_capacity(test.len());
                for r in &test {
                    let seqs: Vec<Array2<f64>> = (0..r.sentences.len())
                        .map(|i| {
                            emb.get(&(r.study_id.clone(), i))
                                .cloned()
                                .ok_or_else(|| Error::Feature(format!("no embeddings for {} sentence {i}", r.study_id)))
                        })
                        .collect::<Result<_>>()?;
                    out.push(self.from_probs(&r.study_id, model.predict(&seqs)?));
                }
                out
            }
        };
        let path = self.layout.verification(v, mask);
        write_verifications(&path, &self.meta, &results)?;
        Ok(vec![path])
    }

    fn sentence_metrics(&self, pairs: &[EvalPair]) -> Result<MetricsReport> {
        let boot = self.cfg.bootstrap_config();
        let th = self.cfg.eval.threshold;
        let mut report = sentence_report(pairs, th, boot)?;
        for kw in &self.cfg.eval.keywords {
            let score = keyword_f1_micro(pairs, kw, th, boot)?;
            if let Some(ci) = score.ci {
                report.insert(format!("keyword_f1_micro:{kw}"), MetricEntry::from_ci(&ci, score.count));
            }
        }
        Ok(report)
    }

    fn retained(&self) -> Result<Option<Vec<LabeledSentence>>> {
        if self.cfg.eval.balanced_only {
            Ok(Some(read_labels(&self.layout.balanced())?))
        } else {
            Ok(None)
        }
    }

    fn eval(&self, v: Verifier) -> Result<Vec<PathBuf>> {
        let mask = self.cfg.ablation.mask;
        let results = read_verifications(&self.layout.verification(v, mask))?;
        let labels = read_labels(&self.layout.labels())?;
        let retained = self.retained()?;
        let pairs = eval_pairs(&results, &labels, retained.as_deref(), self.cfg.eval.threshold)?;
        let report = self.sentence_metrics(&pairs)?;
        let path = self.layout.metrics(v, mask);
        write_metrics_report(&path, &self.meta, &report)?;
        Ok(vec![path])
    }

    fn score(&self, method: AggregationMethod, report: &GeneratedReport, probs: Option<&[f64]>) -> Result<f64> {
        let ents = token_entropies(report);
        aggregate(
            method,
            &ScoreInputs {
                probs: probs.unwrap_or(&[]),
                token_entropies: ents.as_deref(),
                log_prob: report.log_prob,
                entropy_pooling: self.cfg.selection.entropy_pooling,
            },
        )
    }

    fn needs_probs(&self) -> bool {
        self.cfg.selection.methods.iter().any(|m| m.uses_probs())
    }

    fn reject(&self) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let generated = read_generated(&self.layout.generated())?;
        let ctx = contexts(&studies);
        let test = in_split(&generated, Split::Test);
        let probs: HashMap<String, Vec<f64>> = if self.needs_probs() {
            let path = self.layout.verification(self.cfg.selection.verifier, self.cfg.ablation.mask);
            read_verifications(&path)?.into_iter().map(|r| (r.study_id, r.probs)).collect()
        } else {
            HashMap::new()
        };
        let mut quality: BTreeMap<&str, Quality> = BTreeMap::new();
        for r in &test {
            let study = ctx.get(r.study_id.as_str()).ok_or_else(|| Error::Join(r.study_id.clone()))?;
            quality.insert(&r.study_id, self.quality(r, study)?);
        }
        let mut rows = Vec::new();
        for &method in &self.cfg.selection.methods {
            let scores: Vec<ScoredReport> = test
                .iter()
                .map(|r| {
                    let p = probs.get(&r.study_id).map(Vec::as_slice);
                    if method.uses_probs() && p.is_none() {
                        return Err(Error::Join(format!("{} has no verification", r.study_id)));
                    }
                    Ok(ScoredReport {
                        study_id: r.study_id.clone(),
                        score: self.score(method, r, p)?,
                    })
                })
                .collect::<Result<_>>()?;
            rows.extend(reject_with(method.name(), &scores, &self.cfg.selection.pct_grid, |kept| {
                let items: Vec<&Quality> = kept.iter().map(|id| &quality[id]).collect();
                quality_metrics(&items)
            })?);
        }
        write_rejection_csv(&self.layout.rejection(), &self.meta, &rows)?;
        Ok(vec![self.layout.rejection()])
    }

    fn bon(&self) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let ctx = contexts(&studies);
        let sets: Vec<_> = read_candidates(&self.layout.candidates())?
            .into_iter()
            .filter(|s| split_of(&s.study_id) == Split::Test)
            .collect();
        if sets.is_empty() {
            return Err(Error::Contract("no candidate sets in the test split".into()));
        }
        let flat: Vec<&GeneratedReport> = sets.iter().flat_map(|s| s.candidates.iter()).collect();
        let flat_probs: Vec<Vec<f64>> = if !self.needs_probs() {
            vec![Vec::new(); flat.len()]
        } else {
            match self.cfg.selection.verifier {
                Verifier::Prm => {
                    let model = load_checkpoint(&self.layout.prm_checkpoint())?;
                    self.prm_verify(&model, &studies, &flat, self.cfg.ablation.mask)?
                        .into_iter()
                        .map(|r| r.probs)
                        .collect()
                }
                _ => {
                    let (_, model): (_, MlpModel) = read_json_body(&self.layout.mlp())?;
                    self.mlp_verify(&model, &flat)?.into_iter().map(|r| r.probs).collect()
                }
            }
        };
        let qualities: Vec<Quality> = flat
            .par_iter()
            .map(|r| {
                let study = ctx.get(r.study_id.as_str()).ok_or_else(|| Error::Join(r.study_id.clone()))?;
                self.quality(r, study)
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(sets.len());
        let mut sweep = Vec::with_capacity(sets.len());
        let mut at = 0;
        for set in &sets {
            offsets.push(at);
            let mut scores = BTreeMap::new();
            for &m in &self.cfg.selection.methods {
                let v: Vec<f64> = (0..set.len())
                    .map(|c| self.score(m, &set.candidates[c], Some(&flat_probs[at + c])))
                    .collect::<Result<_>>()?;
                scores.insert(m, v);
            }
            sweep.push(SweepSet {
                study_id: set.study_id.clone(),
                scores,
                findings: (0..set.len()).map(|c| qualities[at + c].findings.clone()).collect(),
            });
            at += set.len();
        }
        let strategies: Vec<Strategy> = self
            .cfg
            .selection
            .methods
            .iter()
            .flat_map(|&method| [false, true].map(|weighted| Strategy { method, weighted }))
            .collect();
        let rows = bon_sweep(&sweep, &strategies, &self.cfg.selection.n_grid, self.cfg.selection.subset, |chosen| {
            let items: Vec<&Quality> = chosen.iter().map(|&(k, c)| &qualities[offsets[k] + c]).collect();
            quality_metrics(&items)
        })?;
        let n_max = *self.cfg.selection.n_grid.iter().max().expect("validated non-empty");
        let mut audit = Vec::new();
        for s in &strategies {
            audit.extend(selection_audit(&sweep, s, n_max)?);
        }
        write_bon_csv(&self.layout.bon(), &self.meta, &rows)?;
        write_selection_audit(&self.layout.selection_audit(), &self.meta, &audit)?;
        Ok(vec![self.layout.bon(), self.layout.selection_audit()])
    }

    fn ablate(&self) -> Result<Vec<PathBuf>> {
        let studies = read_studies(&self.layout.studies())?;
        let generated = read_generated(&self.layout.generated())?;
        let labels = read_labels(&self.layout.labels())?;
        let retained = self.retained()?;
        let test = in_split(&generated, Split::Test);
        let models: Vec<(String, PathBuf)> = if self.cfg.ablation.models.is_empty() {
            vec![("prm".to_string(), self.layout.prm_checkpoint())]
        } else {
            self.cfg.ablation.models.iter().map(|m| (m.name.clone(), m.checkpoint.clone())).collect()
        };
        let mut rows = Vec::new();
        for (name, path) in &models {
            let model = load_checkpoint(path)?;
            for (variant, mask) in AblationMask::table_variants() {
                let results = self.prm_verify(&model, &studies, &test, mask)?;
                let pairs = eval_pairs(&results, &labels, retained.as_deref(), self.cfg.eval.threshold)?;
                rows.push(AblationRow {
                    model: name.clone(),
                    variant: variant.to_string(),
                    metrics: sentence_report(&pairs, self.cfg.eval.threshold, self.cfg.bootstrap_config())?,
                });
            }
        }
        let mut header = vec!["model".to_string(), "variant".to_string()];
        for m in SENTENCE_METRICS {
            header.extend([m.to_string(), format!("{m}_lo"), format!("{m}_hi")]);
        }
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut line = vec![r.model.clone(), r.variant.clone()];
                for m in SENTENCE_METRICS {
                    let e = &r.metrics[m];
                    line.extend([e.point.to_string(), e.lo.to_string(), e.hi.to_string()]);
                }
                line
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_atomic(&self.layout.ablation_csv(), &csv_bytes(&self.meta, &header, &body))?;
        write_json(&self.layout.ablation_json(), &self.meta, &AblationTable { rows })?;
        Ok(vec![self.layout.ablation_csv(), self.layout.ablation_json()])
    }

    fn report(&self) -> Result<Vec<PathBuf>> {
        let inputs = collect_report_inputs(&self.layout)?;
        let text = emit_report(&inputs)?;
        write_atomic(&self.layout.report(), text.as_bytes())?;
        Ok(vec![self.layout.report()])
    }
}
