//! Sentence-level process reward model.
//!
//! A report is verified left to right: the score of sentence `i` is the
//! LABEL1 probability read at the separator that closes it, given the prompt
//! and every earlier sentence followed by its label.

mod checkpoint;
mod encode;
mod gradcheck;
mod loss;
mod model;
mod train;
mod verify;
mod vocab;

pub use checkpoint::{from_container, load_checkpoint, save_checkpoint, to_container};
pub use encode::{encode_prompt, encode_sentence, encode_training, encode_unlabeled, EncodeLimits, SequenceEncoding};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use loss::{clamp_prob, prm_loss, EPS};
pub use model::{label_prob, PrmArch, PrmModel, MODEL_VERSION};
pub use train::{
    build_examples, evaluate_teacher_forced, train, train_from, HistoryRecord, PrmDataset, PrmExample, TrainConfig,
    TrainHistory,
};
pub use verify::{
    read_verifications, verify, verify_many, write_verifications, Feedback, VerificationResult, VerifyItem,
    VerifyOptions,
};
pub use vocab::{label_token, TokenId, Vocabulary, FIELD_IDS, LABEL0, LABEL1, PAD, RESERVED, SEP};
