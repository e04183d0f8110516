//! Object-aware vector-quantized autoencoder.
//!
//! Each masked instance is encoded by its class's convolutional encoder and
//! snapped to the nearest row of that class's codebook (straight-through
//! gradients). The quantized latents of all slots are concatenated in slot
//! order and decoded jointly. Training minimizes reconstruction (MSE plus
//! focal frequency loss), a feature term matching encoder stages to the
//! mirrored decoder stages, the codebook term and the commitment term.

mod config;
mod losses;
mod model;
mod quantize;
mod train;

pub use config::{OaaeConfig, OptimConfig};
pub use losses::{ffl, loss_commit, loss_feature, loss_recon, loss_vq, LossTerms};
pub use model::{build_sis_autoencoder, tensor_to_frames, FrameBatch, Oaae, OaaeOutput};
pub use quantize::{concat_latents, nearest_indices, quantize_st, Codebook, LatentTokenGrid, Quantized};
pub use train::{oaae_header, train_oaae, FramePool, OaaeTrainLog, PROBE_BATCH};
