//! Label-interleaved sequence construction.
//!
//! A training sequence is `prompt ++ [s_1, SEP, y_1, ..., s_m, SEP, y_m]`.
//! The label of sentence `i` sits right after its separator and is predicted
//! from the hidden state at the separator.

use super::vocab::{label_token, TokenId, Vocabulary, SEP};
use crate::corpus::{render_prompt, AblationMask, ClinicalContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeLimits {
    pub max_len: usize,
    pub prompt_budget: usize,
}

impl Default for EncodeLimits {
    fn default() -> Self {
        Self {
            max_len: 1024,
            prompt_budget: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceEncoding {
    pub token_ids: Vec<TokenId>,
    /// Index of each sentence's label slot (one past its SEP).
    pub label_positions: Vec<usize>,
    pub labels: Option<Vec<u8>>,
    /// Trailing sentences that did not fit and were dropped whole.
    pub dropped_sentences: usize,
}

impl SequenceEncoding {
    pub fn num_sentences(&self) -> usize {
        self.label_positions.len()
    }

    /// Positions whose hidden state predicts each label (the SEP tokens).
    pub fn read_positions(&self) -> Vec<usize> {
        self.label_positions.iter().map(|&p| p - 1).collect()
    }
}

/// Renders the prompt under `mask`, tokenizes it and right-truncates to the budget.
pub fn encode_prompt(vocab: &Vocabulary, ctx: &ClinicalContext, mask: AblationMask, budget: usize) -> Vec<TokenId> {
    let mut ids = vocab.tokenize(&render_prompt(ctx, mask));
    ids.truncate(budget);
    ids
}

/// Sentence tokens; embedded newlines are treated as spaces so SEP stays unique.
pub fn encode_sentence(vocab: &Vocabulary, sentence: &str) -> Vec<TokenId> {
    if sentence.contains('\n') {
        vocab.tokenize(&sentence.replace('\n', " "))
    } else {
        vocab.tokenize(sentence)
    }
}

pub fn encode_training(
    vocab: &Vocabulary,
    ctx: &ClinicalContext,
    sentences: &[String],
    labels: &[u8],
    mask: AblationMask,
    limits: EncodeLimits,
) -> Result<SequenceEncoding> {
    if sentences.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} sentences but {} labels",
            sentences.len(),
            labels.len()
        )));
    }
    let mut enc = encode_unlabeled(vocab, ctx, sentences, mask, limits)?;
    let n = enc.num_sentences();
    for (k, &pos) in enc.label_positions.iter().enumerate() {
        enc.token_ids[pos] = label_token(labels[k]);
    }
    enc.labels = Some(labels[..n].to_vec());
    Ok(enc)
}

/// Like [`encode_training`] but with placeholder `LABEL0` slots and no labels.
pub fn encode_unlabeled(
    vocab: &Vocabulary,
    ctx: &ClinicalContext,
    sentences: &[String],
    mask: AblationMask,
    limits: EncodeLimits,
) -> Result<SequenceEncoding> {
    if sentences.is_empty() {
        return Err(Error::Encoding("report has zero sentences".into()));
    }
    if limits.prompt_budget >= limits.max_len {
        return Err(Error::Config("prompt budget must be below max_len".into()));
    }
    let mut ids = encode_prompt(vocab, ctx, mask, limits.prompt_budget);
    let mut label_positions = Vec::with_capacity(sentences.len());
    for s in sentences {
        let toks = encode_sentence(vocab, s);
        if ids.len() + toks.len() + 2 > limits.max_len {
            break;
        }
        ids.extend_from_slice(&toks);
        ids.push(SEP);
        label_positions.push(ids.len());
        ids.push(label_token(0));
    }
    if label_positions.is_empty() {
        return Err(Error::Encoding(format!(
            "first sentence does not fit in max_len {}",
            limits.max_len
        )));
    }
    Ok(SequenceEncoding {
        dropped_sentences: sentences.len() - label_positions.len(),
        token_ids: ids,
        label_positions,
        labels: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_prompt;
    use crate::prm::vocab::{LABEL0, LABEL1};

    const FIG_PROMPT: &str = "Provide a description of the findings in the radiology study in comparison to the prior frontal image. INDICATION: Middle-aged man with possible pneumonia. TECHNIQUE: Anteroposterior (AP) and lateral chest radiographs. COMPARISON: Not applicable.";

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn figure_example_layout() {
        let v = Vocabulary::new(4096).unwrap();
        let ctx = parse_prompt(FIG_PROMPT).unwrap();
        let sents = s(&[
            "There are patchy opacities in the right upper lung, right lower lung, and left lower lung.",
            "No pleural effusion or pneumothorax.",
            "Cardiac size is normal.",
        ]);
        let enc = encode_training(&v, &ctx, &sents, &[0, 0, 1], AblationMask::IDENTITY, EncodeLimits::default()).unwrap();
        assert_eq!(enc.label_positions.len(), 3);
        assert_eq!(*enc.token_ids.last().unwrap(), LABEL1);
        for (&p, &y) in enc.label_positions.iter().zip(&[0u8, 0, 1]) {
            assert_eq!(enc.token_ids[p - 1], SEP);
            assert_eq!(enc.token_ids[p], if y == 1 { LABEL1 } else { LABEL0 });
        }
        assert!(enc.label_positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn one_sentence() {
        let v = Vocabulary::new(64).unwrap();
        let ctx = parse_prompt("INDICATION: cough").unwrap();
        let enc = encode_training(&v, &ctx, &s(&["Clear lungs."]), &[1], AblationMask::IDENTITY, EncodeLimits::default()).unwrap();
        assert_eq!(enc.token_ids.iter().filter(|&&t| t == SEP).count(), 1);
        assert_eq!(enc.token_ids.iter().filter(|&&t| t == LABEL1).count(), 1);
        assert_eq!(enc.token_ids[enc.token_ids.len() - 2], SEP);
    }

    #[test]
    fn overflow_drops_whole_trailing_sentences() {
        let v = Vocabulary::new(64).unwrap();
        let ctx = parse_prompt("INDICATION: cough").unwrap(); // 2 prompt tokens
        let sents = s(&["a b c.", "d e f.", "g h i.", "j k l."]); // 4 tokens each, 6 with SEP+label
        let limits = EncodeLimits {
            max_len: 2 + 3 * 6 + 5,
            prompt_budget: 4,
        };
        let enc = encode_training(&v, &ctx, &sents, &[1, 0, 1, 0], AblationMask::IDENTITY, limits).unwrap();
        assert_eq!(enc.num_sentences(), 3);
        assert_eq!(enc.dropped_sentences, 1);
        assert_eq!(enc.labels.as_deref(), Some(&[1u8, 0, 1][..]));
        assert_eq!(enc.token_ids.len(), 2 + 18);
    }

    #[test]
    fn prompt_is_right_truncated_and_empty_reports_rejected() {
        let v = Vocabulary::new(64).unwrap();
        let ctx = parse_prompt("one two three four five six").unwrap();
        let limits = EncodeLimits {
            max_len: 32,
            prompt_budget: 3,
        };
        let enc = encode_training(&v, &ctx, &s(&["x."]), &[0], AblationMask::IDENTITY, limits).unwrap();
        assert_eq!(&enc.token_ids[..3], &v.tokenize("one two three")[..]);
        assert_eq!(enc.label_positions, vec![3 + 2 + 1]);
        assert!(matches!(
            encode_training(&v, &ctx, &[], &[], AblationMask::IDENTITY, limits),
            Err(Error::Encoding(_))
        ));
    }
}
