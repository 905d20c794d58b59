//! Seeded percentile bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub resamples: usize,
    /// Resamples on which the metric was undefined and which were skipped.
    pub degenerate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Linear-interpolated quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval of `metric` over `resamples` with-replacement draws.
///
/// Resample `b` draws from its own ChaCha stream `(seed, b)`, so the result does
/// not depend on thread scheduling. A metric returning an error on a resample
/// (e.g. a single-class draw for AUROC) marks it degenerate; more than half
/// degenerate is an error.
pub fn bootstrap<T, F>(items: &[T], metric: F, config: BootstrapConfig) -> Result<ConfidenceInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    if items.is_empty() {
        return Err(Error::Contract("bootstrap needs at least one item".into()));
    }
    if !(config.level > 0.0 && config.level < 1.0) || config.resamples == 0 {
        return Err(Error::Config("bootstrap level must be in (0, 1) and resamples positive".into()));
    }
    let point = metric(items)?;
    let n = items.len();
    let values: Vec<Option<f64>> = (0..config.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64);
            let draw: Vec<T> = (0..n).map(|_| items[rng.random_range(0..n)].clone()).collect();
            metric(&draw).ok()
        })
        .collect();
    let mut ok: Vec<f64> = values.into_iter().flatten().collect();
    let degenerate = config.resamples - ok.len();
    if 2 * degenerate > config.resamples || ok.is_empty() {
        return Err(Error::Bootstrap {
            degenerate,
            total: config.resamples,
        });
    }
    ok.sort_by(f64::total_cmp);
    let tail = (1.0 - config.level) / 2.0;
    Ok(ConfidenceInterval {
        point,
        lo: quantile_sorted(&ok, tail),
        hi: quantile_sorted(&ok, 1.0 - tail),
        level: config.level,
        resamples: config.resamples,
        degenerate,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
    }

    #[test]
    fn constant_metric_has_zero_width() {
        let ci = bootstrap(&[1, 2, 3], |_| Ok(0.25), BootstrapConfig::default()).unwrap();
        assert_eq!((ci.lo, ci.hi, ci.point), (0.25, 0.25, 0.25));
    }

    #[test]
    fn mostly_degenerate_is_an_error() {
        let r = bootstrap(&[0u8, 1], |_| Err(Error::SingleClass { positives: 0, negatives: 1 }), BootstrapConfig::default());
        assert!(r.is_err());
    }
}
