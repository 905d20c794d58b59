//! Grey-box baseline: 13 -> hidden (ReLU) -> 1 logit over token statistics.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::NUM_FEATURES;
use crate::error::{Error, Result};
use crate::nn::{bce_with_logit, init_tensor, relu, relu_backward, sigmoid, AdamW, Init, Linear, ParamLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Z-score inputs with training-set statistics before the first layer.
    pub standardize: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 128,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub hidden: usize,
    pub params: Vec<f64>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

struct Net {
    layout: ParamLayout,
    fc1: Linear,
    fc2: Linear,
}

fn net(hidden: usize) -> Net {
    let mut layout = ParamLayout::new();
    let fc1 = Linear::new(&mut layout, "fc1", NUM_FEATURES, hidden, true);
    let fc2 = Linear::new(&mut layout, "fc2", hidden, 1, true);
    Net { layout, fc1, fc2 }
}

impl MlpModel {
    /// All-zero weights: every prediction is exactly 0.5.
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            params: vec![0.0; net(hidden).layout.len()],
            input_mean: vec![0.0; NUM_FEATURES],
            input_scale: vec![1.0; NUM_FEATURES],
        }
    }

    /// Uniform fan-in initialization of both layers.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let n = net(hidden);
        let mut m = Self::zeros(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_tensor(&n.layout, &mut m.params, n.fc1.w, Init::FanIn(NUM_FEATURES), &mut rng);
        init_tensor(&n.layout, &mut m.params, n.fc1.b.unwrap(), Init::FanIn(NUM_FEATURES), &mut rng);
        init_tensor(&n.layout, &mut m.params, n.fc2.w, Init::FanIn(hidden), &mut rng);
        init_tensor(&n.layout, &mut m.params, n.fc2.b.unwrap(), Init::FanIn(hidden), &mut rng);
        m
    }

    fn inputs(&self, rows: &[[f64; NUM_FEATURES]]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), NUM_FEATURES), |(i, j)| {
            (rows[i][j] - self.input_mean[j]) / self.input_scale[j]
        })
    }

    fn logits(&self, n: &Net, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let pre = n.fc1.forward(&n.layout, &self.params, x);
        let h = relu(&pre);
        let z = n.fc2.forward(&n.layout, &self.params, h.view());
        (pre, h, z)
    }

    pub fn predict(&self, rows: &[[f64; NUM_FEATURES]]) -> Vec<f64> {
        if rows.is_empty() {
            return Vec::new();
        }
        let n = net(self.hidden);
        let x = self.inputs(rows);
        let (_, _, z) = self.logits(&n, x.view());
        z.column(0).iter().map(|&v| sigmoid(v)).collect()
    }
}

fn check_labels(labels: &[u8]) -> Result<()> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: labels.len() - pos,
        });
    }
    Ok(())
}

/// Mean BCE with Adam, seeded per-epoch shuffling.
pub fn train_mlp(features: &[[f64; NUM_FEATURES]], labels: &[u8], config: &MlpConfig) -> Result<MlpModel> {
    if features.len() != labels.len() {
        return Err(Error::Contract("features and labels differ in length".into()));
    }
    check_labels(labels)?;
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::Config("batch_size and hidden must be positive".into()));
    }
    let n = net(config.hidden);
    let mut model = MlpModel::init(config.hidden, config.seed);
    if config.standardize {
        for j in 0..NUM_FEATURES {
            let col: Vec<f64> = features.iter().map(|r| r[j]).collect();
            let s = super::features::Summary::of(&col);
            model.input_mean[j] = s.mean;
            model.input_scale[j] = if s.std > 1e-12 { s.std } else { 1.0 };
        }
    }
    let x_all = model.inputs(features);
    let mut opt = AdamW::new(model.params.len(), 0.0);
    let no_decay = vec![false; model.params.len()];
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut step = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let x = x_all.select(ndarray::Axis(0), chunk);
            let (pre, h, z) = model.logits(&n, x.view());
            let b = chunk.len() as f64;
            let mut loss = 0.0;
            let mut dz = Array2::zeros((chunk.len(), 1));
            for (k, &i) in chunk.iter().enumerate() {
                let y = labels[i] as f64;
                loss += bce_with_logit(z[[k, 0]], y);
                dz[[k, 0]] = (sigmoid(z[[k, 0]]) - y) / b;
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite { step });
            }
            let mut g = vec![0.0; model.params.len()];
            let dh = n.fc2.backward(&n.layout, &model.params, &mut g, h.view(), dz.view());
            let dpre = relu_backward(&pre, dh.view());
            n.fc1.backward_params(&n.layout, &mut g, x.view(), dpre.view());
            opt.step(&mut model.params, &g, config.learning_rate, &no_decay);
            step += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uninformative() {
        let p = MlpModel::zeros(50).predict(&[[1.0; NUM_FEATURES], [-3.0; NUM_FEATURES]]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_epochs_and_single_class() {
        let x = vec![[0.0; NUM_FEATURES], [1.0; NUM_FEATURES]];
        let cfg = MlpConfig { epochs: 0, ..Default::default() };
        let m = train_mlp(&x, &[0, 1], &cfg).unwrap();
        assert_eq!(m.params, MlpModel::init(50, 0).params);
        assert!(matches!(train_mlp(&x, &[1, 1], &cfg), Err(Error::SingleClass { .. })));
    }
}
