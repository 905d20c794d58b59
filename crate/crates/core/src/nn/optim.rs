/// Adam with optional decoupled weight decay (AdamW when `weight_decay > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n: usize, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. `decay_mask[i]` selects coordinates subject to weight decay.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, decay_mask: &[bool]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if self.weight_decay > 0.0 && decay_mask[i] {
                params[i] -= lr * self.weight_decay * params[i];
            }
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Linear warm-up over `warmup` steps, then linear decay to zero at `total`.
pub fn linear_warmup_decay(step: usize, warmup: usize, total: usize) -> f64 {
    if total == 0 {
        return 1.0;
    }
    if step < warmup {
        return (step + 1) as f64 / warmup as f64;
    }
    let rest = total.saturating_sub(warmup).max(1);
    (total.saturating_sub(step) as f64 / rest as f64).clamp(0.0, 1.0)
}

/// Cosine annealing multiplier (minimum 0) with half-period `t_max` epochs.
pub fn cosine_annealing(epoch: usize, t_max: usize) -> f64 {
    if t_max == 0 {
        return 1.0;
    }
    0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / t_max as f64).cos())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(linear_warmup_decay(0, 4, 10), 0.25);
        assert_eq!(linear_warmup_decay(3, 4, 10), 1.0);
        assert_eq!(linear_warmup_decay(4, 4, 10), 1.0);
        assert!((linear_warmup_decay(7, 4, 10) - 0.5).abs() < 1e-12);
        assert_eq!(cosine_annealing(0, 10), 1.0);
        assert!((cosine_annealing(5, 10) - 0.5).abs() < 1e-12);
        assert!(cosine_annealing(10, 10).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_direct_form() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-7.0, 1.0)] {
            let p = sigmoid(z);
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut opt = AdamW::new(2, 0.0);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[1.0, -1.0], 0.1, &[true, true]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }
}
