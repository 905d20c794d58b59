//! Causal attention decoder with a two-way label head.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::SequenceEncoding;
use super::loss::{clamp_prob, prm_loss};
use super::vocab::{TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{
    gelu, gelu_backward, init_tensor, snap_to_f32, Init, LayerNorm, Linear, LnCache, MhaCache,
    MultiHeadAttention, ParamLayout, TensorId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrmArch {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
}

impl PrmArch {
    /// Desk-scale decoder: d=64, two blocks, four heads.
    pub fn toy() -> Self {
        Self {
            vocab_size: 4096,
            embed_dim: 64,
            layers: 2,
            heads: 4,
            ffn_dim: 256,
            max_len: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Vocabulary::new(self.vocab_size)?;
        if self.embed_dim == 0 || self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.layers == 0 || self.ffn_dim == 0 || self.max_len < 4 {
            return Err(Error::Config("layers, ffn_dim and max_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
pub(crate) struct Graph {
    tok: TensorId,
    pos: TensorId,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
    head: Linear,
}

impl Graph {
    pub(crate) fn build(arch: &PrmArch) -> (ParamLayout, Graph) {
        let mut l = ParamLayout::new();
        let d = arch.embed_dim;
        let tok = l.add("tok_emb", &[arch.vocab_size, d]);
        let pos = l.add("pos_emb", &[arch.max_len, d]);
        let blocks = (0..arch.layers)
            .map(|i| Block {
                ln1: LayerNorm::new(&mut l, &format!("block{i}.ln1"), d),
                attn: MultiHeadAttention::new(&mut l, &format!("block{i}.attn"), d, arch.heads, true),
                ln2: LayerNorm::new(&mut l, &format!("block{i}.ln2"), d),
                fc1: Linear::new(&mut l, &format!("block{i}.fc1"), d, arch.ffn_dim, true),
                fc2: Linear::new(&mut l, &format!("block{i}.fc2"), arch.ffn_dim, d, true),
            })
            .collect();
        let ln_f = LayerNorm::new(&mut l, "ln_f", d);
        let head = Linear::new(&mut l, "head", d, 2, true);
        (l, Graph { tok, pos, blocks, ln_f, head })
    }
}

struct BlockTrace {
    ln1: LnCache,
    attn: MhaCache,
    ln2_out: Array2<f64>,
    ln2: LnCache,
    pre_act: Array2<f64>,
    act: Array2<f64>,
}

struct Trace {
    blocks: Vec<BlockTrace>,
    final_rows: Array2<f64>,
    lnf: LnCache,
}

#[derive(Debug, Clone)]
pub struct PrmModel {
    pub arch: PrmArch,
    pub layout: ParamLayout,
    pub(crate) graph: Graph,
    pub params: Vec<f64>,
    /// Seed the parameters were initialized from.
    pub seed: u64,
    pub version: String,
}

pub const MODEL_VERSION: &str = "prm-decoder-v1";

impl PartialEq for PrmModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.params == other.params
    }
}

impl PrmModel {
    /// Fresh model: N(0, 0.02) weights, unit norm gains, zero biases.
    pub fn new(arch: PrmArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (layout, graph) = Graph::build(&arch);
        let mut params = vec![0.0; layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, spec) in layout.specs().iter().enumerate() {
            let id = TensorId(i);
            let init = if spec.name.ends_with(".gain") {
                Init::Ones
            } else if spec.shape.len() == 1 {
                Init::Zeros
            } else {
                Init::Normal(0.02)
            };
            init_tensor(&layout, &mut params, id, init, &mut rng);
        }
        snap_to_f32(&mut params);
        Ok(Self {
            arch,
            layout,
            graph,
            params,
            seed,
            version: MODEL_VERSION.to_string(),
        })
    }

    pub(crate) fn from_parts(arch: PrmArch, params: Vec<f64>, seed: u64, version: String) -> Result<Self> {
        arch.validate()?;
        let (layout, graph) = Graph::build(&arch);
        if params.len() != layout.len() {
            return Err(Error::Contract("parameter count does not match architecture".into()));
        }
        Ok(Self {
            arch,
            layout,
            graph,
            params,
            seed,
            version,
        })
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.arch.vocab_size).expect("validated arch")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Zeroes the two-way head so every probability is exactly 0.5.
    pub fn zero_head(&mut self) {
        let head = self.graph.head;
        self.layout.slice_mut(&mut self.params, head.w).fill(0.0);
        if let Some(b) = head.b {
            self.layout.slice_mut(&mut self.params, b).fill(0.0);
        }
    }

    pub fn params_finite(&self) -> bool {
        self.params.iter().all(|x| x.is_finite())
    }

    fn run(&self, p: &[f64], ids: &[TokenId], reads: &[usize]) -> Result<(Array2<f64>, Trace)> {
        let t = ids.len();
        if t == 0 || t > self.arch.max_len {
            return Err(Error::Contract(format!(
                "sequence length {t} outside 1..={}",
                self.arch.max_len
            )));
        }
        if let Some(&bad) = reads.iter().find(|&&r| r >= t) {
            return Err(Error::Contract(format!("read position {bad} beyond sequence length {t}")));
        }
        let l = &self.layout;
        let g = &self.graph;
        let tok = l.mat(p, g.tok);
        let pos = l.mat(p, g.pos);
        let mut x = Array2::zeros((t, self.arch.embed_dim));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row.assign(&tok.row(id as usize));
            row += &pos.row(i);
        }
        let mut blocks = Vec::with_capacity(g.blocks.len());
        for b in &g.blocks {
            let (ln1_out, ln1) = b.ln1.forward(l, p, x.view());
            let (a, attn) = b.attn.forward(l, p, ln1_out.view());
            x += &a;
            let (ln2_out, ln2) = b.ln2.forward(l, p, x.view());
            let pre_act = b.fc1.forward(l, p, ln2_out.view());
            let act = gelu(&pre_act);
            x += &b.fc2.forward(l, p, act.view());
            blocks.push(BlockTrace {
                ln1,
                attn,
                ln2_out,
                ln2,
                pre_act,
                act,
            });
        }
        let picked = x.select(Axis(0), reads);
        let (final_rows, lnf) = g.ln_f.forward(l, p, picked.view());
        let logits = g.head.forward(l, p, final_rows.view());
        Ok((logits, Trace { blocks, final_rows, lnf }))
    }

    fn backprop(&self, p: &[f64], grads: &mut [f64], ids: &[TokenId], reads: &[usize], trace: &Trace, dlogits: ArrayView2<'_, f64>) {
        let l = &self.layout;
        let g = &self.graph;
        let drows = g.head.backward(l, p, grads, trace.final_rows.view(), dlogits);
        let dpicked = g.ln_f.backward(l, p, grads, &trace.lnf, drows.view());
        let mut dx = Array2::zeros((ids.len(), self.arch.embed_dim));
        for (k, &r) in reads.iter().enumerate() {
            let mut row = dx.row_mut(r);
            row += &dpicked.row(k);
        }
        for (b, bt) in g.blocks.iter().zip(&trace.blocks).rev() {
            let dact = b.fc2.backward(l, p, grads, bt.act.view(), dx.view());
            let dpre = gelu_backward(&bt.pre_act, dact.view());
            let dln2 = b.fc1.backward(l, p, grads, bt.ln2_out.view(), dpre.view());
            dx += &b.ln2.backward(l, p, grads, &bt.ln2, dln2.view());
            let dln1 = b.attn.backward(l, p, grads, &bt.attn, dx.view());
            dx += &b.ln1.backward(l, p, grads, &bt.ln1, dln1.view());
        }
        {
            let mut gpos = l.mat_mut(grads, g.pos);
            for i in 0..ids.len() {
                let mut row = gpos.row_mut(i);
                row += &dx.row(i);
            }
        }
        let mut gtok = l.mat_mut(grads, g.tok);
        for (i, &id) in ids.iter().enumerate() {
            let mut row = gtok.row_mut(id as usize);
            row += &dx.row(i);
        }
    }

    /// Two label logits `(LABEL0, LABEL1)` at each read position.
    pub fn logits_at(&self, ids: &[TokenId], reads: &[usize]) -> Result<Vec<[f64; 2]>> {
        let (logits, _) = self.run(&self.params, ids, reads)?;
        Ok(logits.rows().into_iter().map(|r| [r[0], r[1]]).collect())
    }

    /// P(LABEL1) at each read position.
    pub fn probs_at(&self, ids: &[TokenId], reads: &[usize]) -> Result<Vec<f64>> {
        Ok(self.logits_at(ids, reads)?.into_iter().map(label_prob).collect())
    }

    /// Logits restricted to the two label tokens at every label slot of `enc`.
    pub fn forward(&self, enc: &SequenceEncoding) -> Result<Vec<[f64; 2]>> {
        self.logits_at(&enc.token_ids, &enc.read_positions())
    }

    /// Summed BCE over the masked label slots and its gradient with respect to
    /// `params`, accumulated into `grads`. Returns `(loss, counted_slots)`.
    pub fn loss_and_grad_with(
        &self,
        params: &[f64],
        enc: &SequenceEncoding,
        loss_mask: Option<&[bool]>,
        grads: Option<&mut [f64]>,
    ) -> Result<(f64, usize)> {
        let labels = enc
            .labels
            .as_ref()
            .ok_or_else(|| Error::Contract("training encoding carries no labels".into()))?;
        let all_reads = enc.read_positions();
        let keep: Vec<usize> = (0..all_reads.len())
            .filter(|&k| loss_mask.map_or(true, |m| m.get(k).copied().unwrap_or(false)))
            .collect();
        if keep.is_empty() {
            return Ok((0.0, 0));
        }
        let reads: Vec<usize> = keep.iter().map(|&k| all_reads[k]).collect();
        let ys: Vec<u8> = keep.iter().map(|&k| labels[k]).collect();
        let (logits, trace) = self.run(params, &enc.token_ids, &reads)?;
        let probs: Vec<f64> = logits.rows().into_iter().map(|r| label_prob([r[0], r[1]])).collect();
        let loss = prm_loss(&probs, &ys)?;
        if let Some(grads) = grads {
            let mut dlogits = Array2::zeros((reads.len(), 2));
            for (k, (&p, &y)) in probs.iter().zip(&ys).enumerate() {
                // dL/dz for z = l1 - l0; zero where the clamp is active
                let dz = if clamp_prob(p) != p { 0.0 } else { p - y as f64 };
                dlogits[[k, 0]] = -dz;
                dlogits[[k, 1]] = dz;
            }
            // Backward only needs the trace; it was built from `params`.
            self.backprop(params, grads, &enc.token_ids, &reads, &trace, dlogits.view());
        }
        Ok((loss, reads.len()))
    }

    pub fn loss_and_grad(
        &self,
        enc: &SequenceEncoding,
        loss_mask: Option<&[bool]>,
        grads: Option<&mut [f64]>,
    ) -> Result<(f64, usize)> {
        self.loss_and_grad_with(&self.params, enc, loss_mask, grads)
    }
}

/// Softmax over `(LABEL0, LABEL1)`, returning the LABEL1 mass.
pub fn label_prob(logits: [f64; 2]) -> f64 {
    crate::nn::sigmoid(logits[1] - logits[0])
}
