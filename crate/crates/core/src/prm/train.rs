//! Training loop: AdamW, linear warm-up/decay, gradient accumulation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{encode_training, EncodeLimits, SequenceEncoding};
use super::model::{label_prob, PrmArch, PrmModel};
use super::loss::prm_loss;
use crate::corpus::{AblationMask, ClinicalContext, GeneratedReport, Study};
use crate::error::{Error, Result};
use crate::labeling::LabeledSentence;
use crate::metrics::auroc;
use crate::nn::{add_assign, clip_global_norm, linear_warmup_decay, snap_to_f32, AdamW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fraction of all optimizer steps spent in linear warm-up.
    pub warmup_fraction: f64,
    pub micro_batch: usize,
    pub accumulation: usize,
    pub max_len: usize,
    pub prompt_budget: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 1e-5,
            warmup_fraction: 0.1,
            micro_batch: 2,
            accumulation: 8,
            max_len: 1024,
            prompt_budget: 512,
            seed: 0,
            weight_decay: 0.01,
            grad_clip: 1.0,
            eval_every: 50,
        }
    }
}

impl TrainConfig {
    /// Same shape as the default protocol, scaled for a randomly initialized
    /// toy decoder: larger step size and a smaller effective batch.
    pub fn toy() -> Self {
        Self {
            learning_rate: 2e-3,
            warmup_fraction: 0.05,
            micro_batch: 2,
            accumulation: 4,
            max_len: 256,
            prompt_budget: 128,
            eval_every: 50,
            ..Self::default()
        }
    }

    pub fn effective_batch(&self) -> usize {
        self.micro_batch * self.accumulation
    }

    pub fn limits(&self) -> EncodeLimits {
        EncodeLimits {
            max_len: self.max_len,
            prompt_budget: self.prompt_budget,
        }
    }

    pub fn validate(&self, arch: &PrmArch) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.micro_batch == 0 || self.accumulation == 0 || self.eval_every == 0 {
            return bad("micro_batch, accumulation and eval_every must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 || self.grad_clip < 0.0 {
            return bad("weight_decay and grad_clip must be non-negative");
        }
        if self.prompt_budget == 0 || self.prompt_budget >= self.max_len {
            return bad("prompt_budget must be positive and below max_len");
        }
        if self.max_len > arch.max_len {
            return Err(Error::Config(format!(
                "max_len {} exceeds the model's position table ({})",
                self.max_len, arch.max_len
            )));
        }
        Ok(())
    }
}

/// One report with gold labels. `loss_mask[i]` marks sentences that count
/// towards the objective (the balanced subset); all labels appear in the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrmExample {
    pub context: ClinicalContext,
    pub sentences: Vec<String>,
    pub labels: Vec<u8>,
    pub loss_mask: Vec<bool>,
}

impl PrmExample {
    pub fn study_id(&self) -> &str {
        &self.context.study_id
    }

    pub fn encode(&self, model: &PrmModel, limits: EncodeLimits) -> Result<SequenceEncoding> {
        encode_training(
            &model.vocabulary(),
            &self.context,
            &self.sentences,
            &self.labels,
            AblationMask::IDENTITY,
            limits,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrmDataset {
    pub train: Vec<PrmExample>,
    pub validation: Vec<PrmExample>,
}

/// Joins reports with their labels. `retained`, when given, selects which
/// sentences carry loss (e.g. the balanced subset); otherwise all do.
/// Reports with any unlabeled sentence are skipped.
pub fn build_examples(
    studies: &[Study],
    generated: &[GeneratedReport],
    labels: &[LabeledSentence],
    retained: Option<&[LabeledSentence]>,
) -> Result<Vec<PrmExample>> {
    let ctx: HashMap<&str, &ClinicalContext> = studies.iter().map(|s| (s.study_id(), &s.context)).collect();
    let label_of: HashMap<(&str, usize), u8> = labels
        .iter()
        .map(|l| ((l.study_id.as_str(), l.sentence_index), l.label))
        .collect();
    let kept: Option<std::collections::HashSet<(&str, usize)>> =
        retained.map(|r| r.iter().map(|l| (l.study_id.as_str(), l.sentence_index)).collect());
    let mut out = Vec::new();
    for report in generated {
        let context = ctx
            .get(report.study_id.as_str())
            .ok_or_else(|| Error::Join(report.study_id.clone()))?;
        let ys: Option<Vec<u8>> = (0..report.sentences.len())
            .map(|i| label_of.get(&(report.study_id.as_str(), i)).copied())
            .collect();
        let Some(ys) = ys else { continue };
        let mask = (0..report.sentences.len())
            .map(|i| kept.as_ref().map_or(true, |k| k.contains(&(report.study_id.as_str(), i))))
            .collect();
        out.push(PrmExample {
            context: (*context).clone(),
            sentences: report.sentences.iter().map(|s| s.text.clone()).collect(),
            labels: ys,
            loss_mask: mask,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: usize,
    pub epoch: usize,
    /// Mean per-sentence loss since the previous record.
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_auroc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
    /// Mean per-sentence loss of every optimizer step.
    pub step_losses: Vec<f64>,
    /// Mean per-sentence train loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps_per_epoch: usize,
}

/// Per-sentence mean loss and AUROC of `model` on `examples` with gold prefixes.
pub fn evaluate_teacher_forced(model: &PrmModel, examples: &[PrmExample], limits: EncodeLimits) -> Result<(f64, Option<f64>)> {
    let rows: Vec<(Vec<f64>, Vec<u8>)> = examples
        .par_iter()
        .map(|ex| {
            let enc = ex.encode(model, limits)?;
            let logits = model.forward(&enc)?;
            let mut ps = Vec::new();
            let mut ys = Vec::new();
            for (k, l) in logits.into_iter().enumerate() {
                if ex.loss_mask[k] {
                    ps.push(label_prob(l));
                    ys.push(ex.labels[k]);
                }
            }
            Ok((ps, ys))
        })
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
    let labels: Vec<u8> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    if probs.is_empty() {
        return Ok((0.0, None));
    }
    let loss = prm_loss(&probs, &labels)? / probs.len() as f64;
    Ok((loss, auroc(&probs, &labels).ok()))
}

/// Trains a fresh model of architecture `arch` (initialized from `config.seed`).
pub fn train(arch: PrmArch, dataset: &PrmDataset, config: &TrainConfig) -> Result<(PrmModel, TrainHistory)> {
    let model = PrmModel::new(arch, config.seed)?;
    train_from(model, dataset, config)
}

pub fn train_from(mut model: PrmModel, dataset: &PrmDataset, config: &TrainConfig) -> Result<(PrmModel, TrainHistory)> {
    config.validate(&model.arch)?;
    if dataset.train.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let (mut pos, mut neg) = (0usize, 0usize);
    for ex in &dataset.train {
        for (k, &y) in ex.labels.iter().enumerate() {
            if ex.loss_mask[k] {
                if y == 1 {
                    pos += 1
                } else {
                    neg += 1
                }
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Contract(format!(
            "training labels must contain both classes (correct={pos}, hallucinated={neg})"
        )));
    }

    let limits = config.limits();
    let encoded: Vec<SequenceEncoding> = dataset
        .train
        .iter()
        .map(|ex| ex.encode(&model, limits))
        .collect::<Result<_>>()?;

    let batch = config.effective_batch();
    let steps_per_epoch = encoded.len().div_ceil(batch);
    let total = steps_per_epoch * config.epochs;
    let warmup = (config.warmup_fraction * total as f64).round() as usize;
    let decay_mask = model.layout.decay_mask();
    let mut opt = AdamW::new(model.num_params(), config.weight_decay);
    let mut history = TrainHistory {
        steps_per_epoch,
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut step = 0usize;
    let mut window = (0.0f64, 0usize);

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1)));
        order.shuffle(&mut rng);
        let mut epoch_sum = (0.0f64, 0usize);
        for chunk in order.chunks(batch) {
            let model_ref = &model;
            let parts: Vec<(f64, usize, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let mut g = vec![0.0; model_ref.num_params()];
                    let ex = &dataset.train[i];
                    let (loss, n) = model_ref.loss_and_grad(&encoded[i], Some(&ex.loss_mask[..encoded[i].num_sentences()]), Some(&mut g))?;
                    Ok((loss, n, g))
                })
                .collect::<Result<_>>()?;
            let mut grads = vec![0.0; model.num_params()];
            let (mut loss, mut count) = (0.0, 0usize);
            for (l, n, g) in &parts {
                loss += l;
                count += n;
                add_assign(&mut grads, g);
            }
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            clip_global_norm(&mut grads, config.grad_clip);
            let lr = config.learning_rate * linear_warmup_decay(step, warmup, total);
            opt.step(&mut model.params, &grads, lr, &decay_mask);
            snap_to_f32(&mut model.params);
            if !model.params_finite() {
                return Err(Error::NonFinite { step });
            }

            let mean = if count > 0 { loss / count as f64 } else { 0.0 };
            history.step_losses.push(mean);
            window.0 += loss;
            window.1 += count;
            epoch_sum.0 += loss;
            epoch_sum.1 += count;
            step += 1;

            if step % config.eval_every == 0 {
                let (val_loss, val_auroc) = if dataset.validation.is_empty() {
                    (None, None)
                } else {
                    let (l, a) = evaluate_teacher_forced(&model, &dataset.validation, limits)?;
                    (Some(l), a)
                };
                history.records.push(HistoryRecord {
                    step,
                    epoch,
                    train_loss: window.0 / window.1.max(1) as f64,
                    val_loss,
                    val_auroc,
                });
                window = (0.0, 0);
            }
        }
        history.epoch_losses.push(epoch_sum.0 / epoch_sum.1.max(1) as f64);
    }
    if window.1 > 0 {
        history.records.push(HistoryRecord {
            step,
            epoch: config.epochs.saturating_sub(1),
            train_loss: window.0 / window.1 as f64,
            val_loss: None,
            val_auroc: None,
        });
    }
    Ok((model, history))
}
