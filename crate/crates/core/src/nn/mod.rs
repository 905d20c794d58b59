//! Small dense building blocks with hand-written backward passes.
//!
//! Parameters of a model live in one flat `f64` buffer described by a
//! [`ParamLayout`]; gradients use a buffer of the same layout.

mod layers;
mod optim;
mod params;

pub use layers::{
    dropout_mask, gelu, gelu_backward, relu, relu_backward, LayerNorm, Linear, LnCache,
    MhaCache, MultiHeadAttention, LN_EPS,
};
pub use optim::{bce_with_logit, cosine_annealing, linear_warmup_decay, sigmoid, AdamW};
pub use params::{
    add_assign, clip_global_norm, global_norm, init_tensor, snap_to_f32, Init, ParamLayout,
    TensorId, TensorSpec,
};
