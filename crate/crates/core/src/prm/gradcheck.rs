//! Central finite differences against the analytic gradient of the summed loss.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::encode::SequenceEncoding;
use super::model::PrmModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Coordinate with the largest error, with its analytic and numeric values.
    pub worst: Option<(usize, f64, f64)>,
    pub coords: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn batch_loss(model: &PrmModel, params: &[f64], batch: &[SequenceEncoding]) -> Result<f64> {
    let mut total = 0.0;
    for enc in batch {
        total += model.loss_and_grad_with(params, enc, None, None)?.0;
    }
    Ok(total)
}

/// Checks `coords` seeded coordinates. Half are drawn uniformly from all
/// parameters; the other half from tensors other than the embedding tables,
/// which are otherwise dominated by rows no token in `batch` touches.
pub fn grad_check(model: &PrmModel, batch: &[SequenceEncoding], eps: f64, coords: usize, seed: u64) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::Contract("grad_check needs a non-empty batch".into()));
    }
    let n = model.num_params();
    let mut analytic = vec![0.0; n];
    for enc in batch {
        model.loss_and_grad(enc, None, Some(&mut analytic))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense: Vec<usize> = model
        .layout
        .specs()
        .iter()
        .filter(|s| !s.name.ends_with("_emb"))
        .flat_map(|s| s.offset..s.offset + s.numel())
        .collect();
    let half = coords / 2;
    let mut picked: Vec<usize> = sample(&mut rng, n, (coords - half).min(n)).into_iter().collect();
    picked.extend(sample(&mut rng, dense.len(), half.min(dense.len())).into_iter().map(|i| dense[i]));

    let results: Vec<(usize, f64, f64)> = picked
        .par_iter()
        .map(|&i| {
            let mut p = model.params.clone();
            p[i] = model.params[i] + eps;
            let up = batch_loss(model, &p, batch)?;
            p[i] = model.params[i] - eps;
            let down = batch_loss(model, &p, batch)?;
            Ok((i, analytic[i], (up - down) / (2.0 * eps)))
        })
        .collect::<Result<_>>()?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        coords: results.len(),
    };
    for (i, a, b) in results {
        let e = relative_error(a, b);
        if e > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(e);
            report.worst = Some((i, a, b));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_prompt, AblationMask};
    use crate::prm::{encode_training, EncodeLimits, PrmArch};

    fn batch(model: &PrmModel) -> Vec<SequenceEncoding> {
        let ctx = parse_prompt("Describe. INDICATION: cough. TECHNIQUE: PA and lateral.").unwrap();
        let sents: Vec<String> = ["No pneumothorax.", "There is edema.", "Heart size normal."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        vec![
            encode_training(&model.vocabulary(), &ctx, &sents, &[1, 0, 1], AblationMask::IDENTITY, EncodeLimits::default()).unwrap(),
            encode_training(&model.vocabulary(), &ctx, &sents[..2], &[0, 0], AblationMask::IDENTITY, EncodeLimits::default()).unwrap(),
        ]
    }

    #[test]
    fn toy_model_gradients_match() {
        let model = PrmModel::new(PrmArch::toy(), 7).unwrap();
        let b = batch(&model);
        let r = grad_check(&model, &b, 1e-5, 240, 11).unwrap();
        assert_eq!(r.coords, 240);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        let coarse = grad_check(&model, &b, 1e-3, 240, 11).unwrap();
        assert!(coarse.max_relative_error.is_finite());
    }
}
