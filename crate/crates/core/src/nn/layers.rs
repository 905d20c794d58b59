use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{ParamLayout, TensorId};

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: TensorId,
    pub b: Option<TensorId>,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Self {
        let w = layout.add(format!("{name}.weight"), &[fan_in, fan_out]);
        let b = bias.then(|| layout.add(format!("{name}.bias"), &[fan_out]));
        Self { w, b }
    }

    pub fn forward(&self, l: &ParamLayout, p: &[f64], x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = x.dot(&l.mat(p, self.w));
        if let Some(b) = self.b {
            y += &l.vec(p, b);
        }
        y
    }

    /// Accumulates parameter gradients into `g` and returns dL/dx.
    pub fn backward(
        &self,
        l: &ParamLayout,
        p: &[f64],
        g: &mut [f64],
        x: ArrayView2<'_, f64>,
        dy: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        {
            let mut gw = l.mat_mut(g, self.w);
            general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut gw);
        }
        if let Some(b) = self.b {
            let mut gb = l.vec_mut(g, b);
            gb += &dy.sum_axis(Axis(0));
        }
        dy.dot(&l.mat(p, self.w).t())
    }

    /// Backward pass when dL/dx is not needed.
    pub fn backward_params(&self, l: &ParamLayout, g: &mut [f64], x: ArrayView2<'_, f64>, dy: ArrayView2<'_, f64>) {
        {
            let mut gw = l.mat_mut(g, self.w);
            general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut gw);
        }
        if let Some(b) = self.b {
            let mut gb = l.vec_mut(g, b);
            gb += &dy.sum_axis(Axis(0));
        }
    }
}

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: TensorId,
    pub bias: TensorId,
}

pub struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

impl LayerNorm {
    pub fn new(layout: &mut ParamLayout, name: &str, dim: usize) -> Self {
        Self {
            gain: layout.add(format!("{name}.gain"), &[dim]),
            bias: layout.add(format!("{name}.bias"), &[dim]),
        }
    }

    pub fn forward(&self, l: &ParamLayout, p: &[f64], x: ArrayView2<'_, f64>) -> (Array2<f64>, LnCache) {
        let d = x.ncols() as f64;
        let mut xhat = x.to_owned();
        let mut rstd = Array1::zeros(x.nrows());
        for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
            let mean = row.sum() / d;
            row -= mean;
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            *r = 1.0 / (var + LN_EPS).sqrt();
            row *= *r;
        }
        let y = &xhat * &l.vec(p, self.gain) + &l.vec(p, self.bias);
        (y, LnCache { xhat, rstd })
    }

    pub fn backward(
        &self,
        l: &ParamLayout,
        p: &[f64],
        g: &mut [f64],
        cache: &LnCache,
        dy: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        {
            let mut gg = l.vec_mut(g, self.gain);
            gg += &(&dy * &cache.xhat).sum_axis(Axis(0));
        }
        {
            let mut gb = l.vec_mut(g, self.bias);
            gb += &dy.sum_axis(Axis(0));
        }
        let dxhat = &dy * &l.vec(p, self.gain);
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let dh = dxhat.row(i);
            let xh = cache.xhat.row(i);
            let m1 = dh.sum() / d;
            let m2 = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
            let r = cache.rstd[i];
            for j in 0..dy.ncols() {
                dx[[i, j]] = r * (dh[j] - m1 - xh[j] * m2);
            }
        }
        dx
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh approximation of GELU.
pub fn gelu(u: &Array2<f64>) -> Array2<f64> {
    u.mapv(|x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()))
}

pub fn gelu_backward(u: &Array2<f64>, dy: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut dx = u.mapv(|x| {
        let inner = GELU_C * (x + 0.044715 * x * x * x);
        let t = inner.tanh();
        let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
        0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
    });
    dx *= &dy;
    dx
}

pub fn relu(u: &Array2<f64>) -> Array2<f64> {
    u.mapv(|x| x.max(0.0))
}

pub fn relu_backward(u: &Array2<f64>, dy: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut dx = dy.to_owned();
    dx.zip_mut_with(u, |d, &x| {
        if x <= 0.0 {
            *d = 0.0
        }
    });
    dx
}

/// Inverted dropout mask (`0` or `1/(1-rate)`).
pub fn dropout_mask<R: Rng>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < rate { 0.0 } else { keep })
}

/// Multi-head self-attention with input/output projections.
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
    pub causal: bool,
}

pub struct MhaCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
}

impl MhaCache {
    /// Attention weights of one head (rows: queries, cols: keys).
    pub fn probs(&self, head: usize) -> &Array2<f64> {
        &self.probs[head]
    }
}

impl MultiHeadAttention {
    pub fn new(layout: &mut ParamLayout, name: &str, dim: usize, heads: usize, causal: bool) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim {dim} not divisible by {heads} heads");
        Self {
            q: Linear::new(layout, &format!("{name}.q"), dim, dim, true),
            k: Linear::new(layout, &format!("{name}.k"), dim, dim, true),
            v: Linear::new(layout, &format!("{name}.v"), dim, dim, true),
            o: Linear::new(layout, &format!("{name}.o"), dim, dim, true),
            heads,
            dim,
            causal,
        }
    }

    pub fn linears(&self) -> [Linear; 4] {
        [self.q, self.k, self.v, self.o]
    }

    pub fn forward(&self, l: &ParamLayout, p: &[f64], x: ArrayView2<'_, f64>) -> (Array2<f64>, MhaCache) {
        let t = x.nrows();
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.q.forward(l, p, x);
        let k = self.k.forward(l, p, x);
        let v = self.v.forward(l, p, x);
        let mut ctx = Array2::zeros((t, self.dim));
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut a = qh.dot(&kh.t());
            for i in 0..t {
                let lim = if self.causal { i + 1 } else { t };
                let mut row = a.row_mut(i);
                let mut mx = f64::NEG_INFINITY;
                for j in 0..lim {
                    row[j] *= scale;
                    mx = mx.max(row[j]);
                }
                let mut sum = 0.0;
                for j in 0..lim {
                    row[j] = (row[j] - mx).exp();
                    sum += row[j];
                }
                for j in 0..lim {
                    row[j] /= sum;
                }
                for j in lim..t {
                    row[j] = 0.0;
                }
            }
            ctx.slice_mut(cols).assign(&a.dot(&vh));
            probs.push(a);
        }
        let out = self.o.forward(l, p, ctx.view());
        (
            out,
            MhaCache {
                x: x.to_owned(),
                q,
                k,
                v,
                probs,
                ctx,
            },
        )
    }

    pub fn backward(
        &self,
        l: &ParamLayout,
        p: &[f64],
        g: &mut [f64],
        c: &MhaCache,
        dout: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let dctx = self.o.backward(l, p, g, c.ctx.view(), dout);
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let a = &c.probs[h];
            let dc = dctx.slice(cols);
            dv.slice_mut(cols).assign(&a.t().dot(&dc));
            let da = dc.dot(&c.v.slice(cols).t());
            // softmax backward, row-wise
            let mut ds = &da * a;
            for i in 0..ds.nrows() {
                let rs: f64 = ds.row(i).sum();
                let arow = a.row(i);
                let mut drow = ds.row_mut(i);
                for j in 0..drow.len() {
                    drow[j] -= arow[j] * rs;
                }
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let mut dx = self.q.backward(l, p, g, c.x.view(), dq.view());
        dx += &self.k.backward(l, p, g, c.x.view(), dk.view());
        dx += &self.v.backward(l, p, g, c.x.view(), dv.view());
        dx
    }
}
