use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Handle to one named tensor inside a [`ParamLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// How every trainable tensor of a model maps onto one flat `f64` buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    specs: Vec<TensorSpec>,
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> TensorId {
        let spec = TensorSpec {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.len,
        };
        self.len += spec.numel();
        self.specs.push(spec);
        TensorId(self.specs.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        &self.specs[id.0]
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.specs.iter().position(|s| s.name == name).map(TensorId)
    }

    pub fn slice<'a>(&self, data: &'a [f64], id: TensorId) -> &'a [f64] {
        let s = &self.specs[id.0];
        &data[s.offset..s.offset + s.numel()]
    }

    pub fn slice_mut<'a>(&self, data: &'a mut [f64], id: TensorId) -> &'a mut [f64] {
        let s = &self.specs[id.0];
        &mut data[s.offset..s.offset + s.numel()]
    }

    pub fn mat<'a>(&self, data: &'a [f64], id: TensorId) -> ArrayView2<'a, f64> {
        let s = &self.specs[id.0];
        debug_assert_eq!(s.shape.len(), 2, "{} is not a matrix", s.name);
        ArrayView2::from_shape((s.shape[0], s.shape[1]), self.slice(data, id)).expect("shape")
    }

    pub fn mat_mut<'a>(&self, data: &'a mut [f64], id: TensorId) -> ArrayViewMut2<'a, f64> {
        let s = self.specs[id.0].clone();
        ArrayViewMut2::from_shape((s.shape[0], s.shape[1]), self.slice_mut(data, id)).expect("shape")
    }

    pub fn vec<'a>(&self, data: &'a [f64], id: TensorId) -> ArrayView1<'a, f64> {
        ArrayView1::from(self.slice(data, id))
    }

    pub fn vec_mut<'a>(&self, data: &'a mut [f64], id: TensorId) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(self.slice_mut(data, id))
    }

    /// Whether weight decay applies (matrices only; biases and norm gains are exempt).
    pub fn decays(&self, id: TensorId) -> bool {
        self.specs[id.0].shape.len() >= 2
    }

    /// Per-coordinate weight-decay mask for the flat buffer.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for (i, s) in self.specs.iter().enumerate() {
            if self.decays(TensorId(i)) {
                mask[s.offset..s.offset + s.numel()].fill(true);
            }
        }
        mask
    }
}

/// Parameter initializers.
pub enum Init {
    Zeros,
    Ones,
    Normal(f64),
    /// U(-b, b) with b = 1/sqrt(fan_in).
    FanIn(usize),
}

pub fn init_tensor<R: Rng>(layout: &ParamLayout, data: &mut [f64], id: TensorId, init: Init, rng: &mut R) {
    let slot = layout.slice_mut(data, id);
    match init {
        Init::Zeros => slot.fill(0.0),
        Init::Ones => slot.fill(1.0),
        Init::Normal(std) => {
            let n = Normal::new(0.0, std).expect("valid std");
            for x in slot.iter_mut() {
                *x = n.sample(rng);
            }
        }
        Init::FanIn(fan_in) => {
            let b = 1.0 / (fan_in as f64).sqrt();
            for x in slot.iter_mut() {
                *x = rng.random_range(-b..b);
            }
        }
    }
}

/// Rounds every value to the nearest `f32`, so a 32-bit checkpoint stores the
/// parameters exactly.
pub fn snap_to_f32(data: &mut [f64]) {
    for x in data.iter_mut() {
        *x = *x as f32 as f64;
    }
}

pub fn add_assign(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

pub fn global_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `g` down so its L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(g);
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        for x in g.iter_mut() {
            *x *= s;
        }
    }
    norm
}
