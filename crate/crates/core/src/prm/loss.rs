use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Summed binary cross-entropy `-Σ [y log p + (1 - y) log(1 - p)]`.
///
/// Not averaged: a batch loss is the sum of its reports' losses.
pub fn prm_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Contract(format!(
            "prm_loss: {} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_values() {
        let l = prm_loss(&[0.5; 4], &[1, 0, 1, 1]).unwrap();
        assert!((l - 4.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((prm_loss(&[0.9], &[1]).unwrap() - 0.105_360_516).abs() < 1e-9);
        let exact = prm_loss(&[1.0, 0.0, 1.0, 0.0], &[1, 0, 1, 0]).unwrap();
        assert!(exact >= 0.0 && exact <= 4.0 * -(1.0 - EPS).ln() + 1e-15);
        assert!(prm_loss(&[0.0], &[1]).unwrap().is_finite());
        assert!(prm_loss(&[0.5], &[1, 0]).is_err());
    }
}
