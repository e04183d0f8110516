use candle_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SamplerConfig;
use super::model::Predictor;
use super::train::stack_tokens;
use crate::error::{Error, Result};
use crate::nn::to_f64_vec;
use crate::oaae::{tensor_to_frames, FrameBatch, Oaae};
use crate::synthdata::{Frame, PanopticMask};

/// Index of the largest logit, lowest index on ties.
pub fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// Probabilities `softmax(logits / τ)`.
pub fn softmax_with_temperature(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Draws one index from `softmax(logits / τ)`, or the argmax when the
/// sampler asks for it.
pub fn sample_categorical(logits: &[f64], sampler: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<u32> {
    sampler.validate()?;
    if logits.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    if sampler.argmax {
        return Ok(argmax(logits));
    }
    let p = softmax_with_temperature(logits, sampler.temperature);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Ok(i as u32);
        }
    }
    Ok((p.len() - 1) as u32)
}

/// Frames produced by a rollout: the reconstructions of the conditioning
/// frames followed by the predicted frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub context: Vec<Frame>,
    pub predicted: Vec<Frame>,
    /// Final token streams (context plus sampled frames), per slot.
    pub tokens: Vec<Vec<u32>>,
}

/// Encodes the conditioning frames, then repeatedly predicts the next
/// frame's tokens from the logits at the last time step (every position
/// sampled independently) and appends them. All token frames are decoded
/// through the autoencoder.
pub fn sample_autoregressive(
    model: &Predictor,
    oaae: &Oaae,
    frames: &[Frame],
    masks: &[PanopticMask],
    horizon: usize,
    sampler: &SamplerConfig,
) -> Result<Rollout> {
    sampler.validate()?;
    if frames.is_empty() || frames.len() != masks.len() {
        return Err(Error::Shape("conditioning needs matching non-empty frames and masks".into()));
    }
    let t0 = frames.len();
    if t0 + horizon > model.shape().max_frames + 1 {
        return Err(Error::Shape(format!(
            "{t0} context + {horizon} predicted frames exceed the model's {}-frame window",
            model.shape().max_frames
        )));
    }
    let fr: Vec<&Frame> = frames.iter().collect();
    let mr: Vec<&PanopticMask> = masks.iter().collect();
    let batch = FrameBatch::new(&fr, &mr, oaae.schema().n_slots(), oaae.dtype())?;
    let mut tokens = oaae.encode_tokens(&batch)?;
    if tokens.len() != model.shape().n_slots() {
        return Err(Error::SchemaMismatch(format!(
            "autoencoder yields {} streams, predictor expects {}",
            tokens.len(),
            model.shape().n_slots()
        )));
    }
    let cells = model.shape().n_cells();
    let k = model.shape().codebook_size;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    for step in 0..horizon {
        let t = t0 + step;
        let input = stack_tokens(&[tokens.as_slice()], t, cells)?;
        let logits = model.forward(&input, None)?;
        for (slot, l) in logits.iter().enumerate() {
            let last = to_f64_vec(&l.narrow(1, t - 1, 1)?)?;
            for p in 0..cells {
                let tok = sample_categorical(&last[p * k..(p + 1) * k], sampler, &mut rng)?;
                tokens[slot].push(tok);
            }
        }
    }
    let side = model.shape().grid_side;
    let total = t0 + horizon;
    let per_frame: Vec<Vec<u32>> = tokens.clone();
    let decoded: Tensor = oaae.decode_tokens(&per_frame, total, side)?;
    let mut all = tensor_to_frames(&decoded)?;
    let predicted = all.split_off(t0);
    Ok(Rollout { context: all, predicted, tokens })
}
