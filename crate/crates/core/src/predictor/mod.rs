//! Latent transformer predictors over per-slot token grids.
//!
//! Each block applies, per slot and with pre-normalization and residuals,
//! bidirectional self-attention across the token grid of a frame and
//! causal self-attention across time. SCAT then lets every slot attend to
//! every other slot (spatially and causally in time); SNCAT instead applies
//! a per-slot feed-forward with the same parameter budget; SiS runs one wide
//! stream for the whole scene. Logits at time `t` predict the tokens of
//! frame `t + 1`.

mod attention;
mod config;
mod model;
mod sample;
mod train;

pub use attention::{attend, attention_weights, causal_mask, CrossAttention, SelfAttention};
pub use config::{PredictorConfig, SamplerConfig, Variant, MAX_TEMPERATURE};
pub use model::{build_variant, count_parameters, matched_ff_hidden, variant_shape, Predictor, PredictorShape};
pub use sample::{argmax, sample_autoregressive, sample_categorical, softmax_with_temperature, Rollout};
pub use train::{
    cosine_lr, input_tokens, next_frame_loss, noisy_frames, stack_tokens, token_cross_entropy, tokenize_clip,
    train_predictor, train_step, warmup_steps, PredictorTrainLog, TokenClip,
};
