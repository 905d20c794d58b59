//! Hidden-state baseline: projection, one self-attention block with a
//! residual connection, mean pooling and a linear classifier.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    add_assign, bce_with_logit, cosine_annealing, dropout_mask, init_tensor, sigmoid, AdamW, Init, Linear,
    MultiHeadAttention, ParamLayout,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttnConfig {
    pub proj_dim: usize,
    pub heads: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Cosine annealing half-period, in epochs.
    pub t_max: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for AttnConfig {
    fn default() -> Self {
        Self {
            proj_dim: 1024,
            heads: 8,
            learning_rate: 1e-4,
            weight_decay: 0.01,
            t_max: 10,
            dropout: 0.1,
            batch_size: 128,
            max_epochs: 30,
            patience: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttnArch {
    pub input_dim: usize,
    pub proj_dim: usize,
    pub heads: usize,
}

struct Net {
    layout: ParamLayout,
    proj: Linear,
    attn: MultiHeadAttention,
    head: Linear,
}

fn net(a: AttnArch) -> Net {
    let mut layout = ParamLayout::new();
    let proj = Linear::new(&mut layout, "proj", a.input_dim, a.proj_dim, true);
    let attn = MultiHeadAttention::new(&mut layout, "attn", a.proj_dim, a.heads, false);
    let head = Linear::new(&mut layout, "head", a.proj_dim, 1, true);
    Net { layout, proj, attn, head }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnModel {
    pub arch: AttnArch,
    pub params: Vec<f64>,
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttnHistory {
    pub epochs: Vec<AttnEpoch>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl AttnModel {
    pub fn init(arch: AttnArch, seed: u64) -> Result<Self> {
        if arch.input_dim == 0 || arch.heads == 0 || arch.proj_dim % arch.heads != 0 || arch.proj_dim == 0 {
            return Err(Error::Config(format!(
                "proj_dim {} must be a positive multiple of heads {}",
                arch.proj_dim, arch.heads
            )));
        }
        let n = net(arch);
        let mut params = vec![0.0; n.layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, spec) in n.layout.specs().iter().enumerate() {
            let fan_in = if spec.shape.len() == 2 { spec.shape[0] } else { 0 };
            let id = crate::nn::TensorId(i);
            let init = if fan_in > 0 { Init::FanIn(fan_in) } else { Init::Zeros };
            init_tensor(&n.layout, &mut params, id, init, &mut rng);
        }
        Ok(Self { arch, params })
    }

    /// Logit for one sequence; `drop` is the dropout mask on the pooled vector.
    fn forward_one(&self, n: &Net, x: ArrayView2<'_, f64>, drop: Option<&Array1<f64>>) -> (f64, Cache) {
        let l = &n.layout;
        let p = &self.params;
        let xp = n.proj.forward(l, p, x);
        let (a, mha) = n.attn.forward(l, p, xp.view());
        let h = &xp + &a;
        let mut pooled = h.mean_axis(Axis(0)).expect("non-empty sequence");
        if let Some(m) = drop {
            pooled *= m;
        }
        let pooled2 = pooled.insert_axis(Axis(0));
        let z = n.head.forward(l, p, pooled2.view())[[0, 0]];
        (
            z,
            Cache {
                mha,
                pooled: pooled2,
                rows: x.nrows(),
            },
        )
    }

    fn backward_one(&self, n: &Net, x: ArrayView2<'_, f64>, c: &Cache, drop: Option<&Array1<f64>>, dz: f64, g: &mut [f64]) {
        let l = &n.layout;
        let p = &self.params;
        let dzm = Array2::from_elem((1, 1), dz);
        let mut dpooled = n.head.backward(l, p, g, c.pooled.view(), dzm.view()).row(0).to_owned();
        if let Some(m) = drop {
            dpooled *= m;
        }
        let dh = Array2::from_shape_fn((c.rows, self.arch.proj_dim), |(_, j)| dpooled[j] / c.rows as f64);
        let mut dxp = n.attn.backward(l, p, g, &c.mha, dh.view());
        dxp += &dh;
        n.proj.backward_params(l, g, x, dxp.view());
    }

    /// Probability of the positive (correct) class per sequence, in eval mode.
    pub fn predict(&self, sequences: &[Array2<f64>]) -> Result<Vec<f64>> {
        let n = net(self.arch);
        sequences
            .par_iter()
            .map(|x| {
                self.check_input(x)?;
                Ok(sigmoid(self.forward_one(&n, x.view(), None).0))
            })
            .collect()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.nrows() == 0 || x.ncols() != self.arch.input_dim {
            return Err(Error::Feature(format!(
                "embedding sequence of shape {:?}, expected (>=1, {})",
                x.dim(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// Mean BCE in eval mode.
    pub fn loss(&self, sequences: &[Array2<f64>], labels: &[u8]) -> Result<f64> {
        for x in sequences {
            self.check_input(x)?;
        }
        let n = net(self.arch);
        let losses: Vec<f64> = sequences
            .par_iter()
            .zip(labels)
            .map(|(x, &y)| bce_with_logit(self.forward_one(&n, x.view(), None).0, y as f64))
            .collect();
        let sum: f64 = losses.iter().sum();
        Ok(sum / sequences.len().max(1) as f64)
    }
}

struct Cache {
    mha: crate::nn::MhaCache,
    pooled: Array2<f64>,
    rows: usize,
}

/// Trains with AdamW and a per-epoch cosine schedule, stopping once validation
/// loss has not improved for `patience` epochs. Returns the best snapshot.
pub fn train_attn(
    train: &[Array2<f64>],
    train_labels: &[u8],
    val: &[Array2<f64>],
    val_labels: &[u8],
    config: &AttnConfig,
) -> Result<(AttnModel, AttnHistory)> {
    if train.len() != train_labels.len() || val.len() != val_labels.len() {
        return Err(Error::Contract("sequences and labels differ in length".into()));
    }
    let pos = train_labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: train.len() - pos,
        });
    }
    if val.is_empty() {
        return Err(Error::Contract("attention baseline needs a validation split".into()));
    }
    if config.batch_size == 0 || !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::Config("batch_size must be positive and dropout in [0, 1)".into()));
    }
    let arch = AttnArch {
        input_dim: train[0].ncols(),
        proj_dim: config.proj_dim,
        heads: config.heads,
    };
    let mut model = AttnModel::init(arch, config.seed)?;
    for x in train.iter().chain(val) {
        model.check_input(x)?;
    }
    let n = net(arch);
    let decay = n.layout.decay_mask();
    let mut opt = AdamW::new(model.params.len(), config.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut history = AttnHistory {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best = model.clone();
    let mut since_best = 0;
    let mut step = 0;
    for epoch in 0..config.max_epochs {
        let lr = config.learning_rate * cosine_annealing(epoch, config.t_max);
        order.shuffle(&mut shuffle_rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len() as f64;
            let parts: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((epoch as u64 + 1) << 32));
                    rng.set_stream(i as u64);
                    let mask = (config.dropout > 0.0)
                        .then(|| dropout_mask((1, arch.proj_dim), config.dropout, &mut rng).row(0).to_owned());
                    let (z, cache) = model.forward_one(&n, train[i].view(), mask.as_ref());
                    let y = train_labels[i] as f64;
                    let mut g = vec![0.0; model.params.len()];
                    model.backward_one(&n, train[i].view(), &cache, mask.as_ref(), (sigmoid(z) - y) / b, &mut g);
                    (bce_with_logit(z, y), g)
                })
                .collect();
            let mut grads = vec![0.0; model.params.len()];
            let mut loss = 0.0;
            for (l, g) in &parts {
                loss += l;
                add_assign(&mut grads, g);
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite { step });
            }
            opt.step(&mut model.params, &grads, lr, &decay);
            sum += loss;
            count += chunk.len();
            step += 1;
        }
        let val_loss = model.loss(val, val_labels)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite { step });
        }
        history.epochs.push(AttnEpoch {
            epoch,
            train_loss: sum / count as f64,
            val_loss,
        });
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AttnArch {
        AttnArch {
            input_dim: 4,
            proj_dim: 8,
            heads: 2,
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let m = AttnModel::init(small(), 3).unwrap();
        let xs = vec![Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 / 10.0)];
        let a = m.predict(&xs).unwrap();
        assert_eq!(a, m.predict(&xs).unwrap());
        assert!(a[0] > 0.0 && a[0] < 1.0);
    }

    #[test]
    fn single_token_pooling_is_identity() {
        // with one token, attention returns that token's value, so pooling the
        // residual stream equals the residual stream itself
        let m = AttnModel::init(small(), 5).unwrap();
        let n = net(small());
        let x = Array2::from_shape_fn((1, 4), |(_, j)| j as f64 - 1.5);
        let (z, c) = m.forward_one(&n, x.view(), None);
        let xp = n.proj.forward(&n.layout, &m.params, x.view());
        let v = n.attn.v.forward(&n.layout, &m.params, xp.view());
        let o = n.attn.o.forward(&n.layout, &m.params, v.view());
        let expect = &xp + &o;
        for j in 0..8 {
            assert!((c.pooled[[0, j]] - expect[[0, j]]).abs() < 1e-12);
        }
        assert!(z.is_finite());
    }
}
