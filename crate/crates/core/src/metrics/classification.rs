use serde::{Deserialize, Serialize};

/// One scored sentence. `pred` is `1[prob >= threshold]` for the threshold
/// the pair was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub prob: f64,
    pub pred: u8,
    pub label: u8,
    #[serde(default)]
    pub text: String,
}

impl EvalPair {
    pub fn new(prob: f64, label: u8, threshold: f64) -> Self {
        Self {
            prob,
            pred: u8::from(prob >= threshold),
            label,
            text: String::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    /// Whether the sentence text contains `keyword`, ignoring case.
    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.text.to_lowercase().contains(&keyword.to_lowercase())
    }
}

pub fn pairs_from(probs: &[f64], labels: &[u8], threshold: f64) -> Vec<EvalPair> {
    probs.iter().zip(labels).map(|(&p, &y)| EvalPair::new(p, y, threshold)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_preds(preds: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut c = Self::default();
        for (pred, label) in preds {
            match (pred == 1, label == 1) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if d == 0.0 {
            return 0.0;
        }
        (tp * tn - fp * fn_) / d.sqrt()
    }

    fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
        let d = 2 * tp + fp + fn_;
        if d == 0 {
            0.0
        } else {
            2.0 * tp as f64 / d as f64
        }
    }

    /// Mean of the F1 of each class treated as positive.
    pub fn f1_macro(&self) -> f64 {
        0.5 * (Self::f1(self.tp, self.fp, self.fn_) + Self::f1(self.tn, self.fn_, self.fp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub mcc: f64,
}

/// Accuracy, macro F1 and MCC of `1[prob >= threshold]`.
pub fn classification_metrics(pairs: &[EvalPair], threshold: f64) -> ClassificationMetrics {
    let c = Confusion::from_preds(pairs.iter().map(|p| (u8::from(p.prob >= threshold), p.label)));
    ClassificationMetrics {
        accuracy: c.accuracy(),
        f1_macro: c.f1_macro(),
        mcc: c.mcc(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(preds: &[u8], labels: &[u8]) -> ClassificationMetrics {
        let pairs: Vec<EvalPair> = preds.iter().zip(labels).map(|(&p, &y)| EvalPair::new(p as f64, y, 0.5)).collect();
        classification_metrics(&pairs, 0.5)
    }

    #[test]
    fn degenerate_and_perfect() {
        assert_eq!(m(&[1, 1, 1, 1], &[1, 0, 1, 0]).mcc, 0.0);
        assert_eq!(m(&[0, 0, 0], &[1, 0, 0]).mcc, 0.0);
        let p = m(&[1, 0, 1], &[1, 0, 1]);
        assert_eq!((p.accuracy, p.f1_macro, p.mcc), (1.0, 1.0, 1.0));
        assert_eq!(m(&[1, 1, 0, 0], &[1, 0, 1, 0]).mcc, 0.0);
    }

    #[test]
    fn macro_f1_hand_value() {
        // tp=2 fp=1 fn=1 tn=1: F1+ = 4/6, F1- = 2/4
        let r = m(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]);
        assert!((r.f1_macro - (4.0 / 6.0 + 0.5) / 2.0).abs() < 1e-12);
    }
}
