use std::f64::consts::PI;

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{PredictorConfig, Variant};
use super::model::{Predictor, PredictorShape};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::kv::{format_list, KvMap};
use crate::nn::to_f64_vec;
use crate::oaae::{FrameBatch, Oaae, OptimConfig};
use crate::synthdata::{Clip, Frame, PanopticMask};

/// A clip together with its clean token streams under a frozen autoencoder.
#[derive(Clone, Debug)]
pub struct TokenClip {
    pub frames: Vec<Frame>,
    pub masks: Vec<PanopticMask>,
    /// One stream per slot, ordered (time, row, column).
    pub tokens: Vec<Vec<u32>>,
}

impl TokenClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn frame_batch(oaae: &Oaae, frames: &[Frame], masks: &[PanopticMask]) -> Result<FrameBatch> {
    let f: Vec<&Frame> = frames.iter().collect();
    let m: Vec<&PanopticMask> = masks.iter().collect();
    FrameBatch::new(&f, &m, oaae.schema().n_slots(), oaae.dtype())
}

/// Encodes every frame of `clip` with the (frozen) autoencoder.
pub fn tokenize_clip(oaae: &Oaae, clip: &Clip) -> Result<TokenClip> {
    let batch = frame_batch(oaae, &clip.frames, &clip.masks)?;
    Ok(TokenClip {
        frames: clip.frames.clone(),
        masks: clip.masks.clone(),
        tokens: oaae.encode_tokens(&batch)?,
    })
}

/// Stacks per-clip streams into `(B, t, S)` tensors, one per slot.
pub fn stack_tokens(streams: &[&[Vec<u32>]], frames: usize, cells: usize) -> Result<Vec<Tensor>> {
    let n_slots = streams[0].len();
    (0..n_slots)
        .map(|k| {
            let mut all = Vec::with_capacity(streams.len() * frames * cells);
            for s in streams {
                all.extend_from_slice(&s[k][..frames * cells]);
            }
            Ok(Tensor::from_vec(all, (streams.len(), frames, cells), &Device::Cpu)?)
        })
        .collect()
}

/// Mean cross-entropy over every slot and position; `logits` are
/// `(B, t, S, K)` and `targets` `(B, t, S)` per slot.
pub fn token_cross_entropy(logits: &[Tensor], targets: &[Tensor]) -> Result<Tensor> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::Shape(format!(
            "{} logit streams vs {} target streams",
            logits.len(),
            targets.len()
        )));
    }
    let k = *logits[0].dims().last().unwrap_or(&0);
    let rows = logits
        .iter()
        .map(|l| Ok(l.reshape(((), k))?))
        .collect::<Result<Vec<_>>>()?;
    let tgt = targets
        .iter()
        .map(|t| Ok(t.flatten_all()?))
        .collect::<Result<Vec<_>>>()?;
    Ok(candle_nn::loss::cross_entropy(&Tensor::cat(&rows, 0)?, &Tensor::cat(&tgt, 0)?)?)
}

/// Teacher-forced next-frame loss: logits at times `0..t−1` against the
/// tokens at `1..t`.
pub fn next_frame_loss(model: &Predictor, inputs: &[Tensor], targets: &[Tensor], rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
    let t = inputs[0].dims()[1];
    if t < 2 {
        return Err(Error::Shape("teacher forcing needs at least two frames".into()));
    }
    let logits = model.forward(inputs, rng)?;
    let l = logits
        .iter()
        .map(|x| Ok(x.narrow(1, 0, t - 1)?))
        .collect::<Result<Vec<_>>>()?;
    let y = targets
        .iter()
        .map(|x| Ok(x.narrow(1, 1, t - 1)?))
        .collect::<Result<Vec<_>>>()?;
    token_cross_entropy(&l, &y)
}

/// Frames perturbed as `clamp(x + σ·ε, 0, 1)` with ε standard normal.
pub fn noisy_frames(frames: &[Frame], std: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Frame>> {
    frames
        .iter()
        .map(|f| {
            let v: Vec<f32> = f
                .data
                .iter()
                .map(|&p| {
                    let e: f64 = rng.sample(StandardNormal);
                    (p as f64 / 255.0 + std * e) as f32
                })
                .collect();
            Frame::from_unit(f.height, f.width, &v)
        })
        .collect()
}

/// Input tokens for a training step: the clip's own tokens, or those of a
/// noised copy of its frames re-encoded by the autoencoder.
pub fn input_tokens(oaae: &Oaae, clip: &TokenClip, noise_std: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<u32>>> {
    if noise_std == 0.0 {
        return Ok(clip.tokens.clone());
    }
    let noisy = noisy_frames(&clip.frames, noise_std, rng)?;
    oaae.encode_tokens(&frame_batch(oaae, &noisy, &clip.masks)?)
}

/// Loss of one teacher-forced step on `clips` (noise on inputs only, the
/// targets stay clean). Dropout is active when `train` is set.
pub fn train_step(
    model: &Predictor,
    oaae: &Oaae,
    clips: &[&TokenClip],
    noise_std: f64,
    rng: &mut ChaCha8Rng,
    train: bool,
) -> Result<Tensor> {
    let frames = clips[0].len();
    let cells = model.shape().n_cells();
    let inputs: Vec<Vec<Vec<u32>>> = clips
        .iter()
        .map(|c| input_tokens(oaae, c, noise_std, rng))
        .collect::<Result<_>>()?;
    let in_refs: Vec<&[Vec<u32>]> = inputs.iter().map(|v| v.as_slice()).collect();
    let tgt_refs: Vec<&[Vec<u32>]> = clips.iter().map(|c| c.tokens.as_slice()).collect();
    let x = stack_tokens(&in_refs, frames, cells)?;
    let y = stack_tokens(&tgt_refs, frames, cells)?;
    next_frame_loss(model, &x, &y, if train { Some(rng) } else { None })
}

/// Linear warm-up over the first `warmup` steps, then cosine decay to 0.
pub fn cosine_lr(base: f64, step: usize, total: usize, warmup: usize) -> f64 {
    if step < warmup {
        return base * (step + 1) as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1);
    let progress = ((step - warmup) as f64 / span as f64).min(1.0);
    base * 0.5 * (1.0 + (PI * progress).cos())
}

/// Warm-up length used for a budget: 5% of the steps, at least one.
pub fn warmup_steps(total: usize) -> usize {
    ((total as f64 * 0.05).round() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorTrainLog {
    pub losses: Vec<f64>,
    /// Clean-input loss on a fixed probe set before and after training.
    pub probe_initial: f64,
    pub probe_final: f64,
}

const PROBE_CLIPS: usize = 8;

fn probe_loss(model: &Predictor, oaae: &Oaae, clips: &[&TokenClip]) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for c in clips {
        total += to_f64_vec(&train_step(model, oaae, &[c], 0.0, &mut rng, false)?)?[0];
    }
    Ok(total / clips.len() as f64)
}

/// Adam with warm-up plus cosine decay on the teacher-forced objective.
/// Clip order, input noise and dropout masks all come from one ChaCha
/// stream seeded by `seed`.
pub fn train_predictor(
    model: &Predictor,
    oaae: &Oaae,
    clips: &[TokenClip],
    optim: &OptimConfig,
    seed: u64,
    mut on_step: impl FnMut(usize, f64),
) -> Result<PredictorTrainLog> {
    optim.validate("predictor_optim")?;
    if clips.is_empty() {
        return Err(Error::Missing("no clips to train the predictor on".into()));
    }
    let probe: Vec<&TokenClip> = (0..PROBE_CLIPS.min(clips.len()))
        .map(|i| &clips[i * clips.len() / PROBE_CLIPS.min(clips.len())])
        .collect();
    let probe_initial = probe_loss(model, oaae, &probe)?;
    let mut opt = AdamW::new(
        model.store().all_vars(),
        ParamsAdamW {
            lr: optim.learning_rate,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let warmup = warmup_steps(optim.steps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = Vec::with_capacity(optim.steps);
    for step in 0..optim.steps {
        opt.set_learning_rate(cosine_lr(optim.learning_rate, step, optim.steps, warmup));
        let batch: Vec<&TokenClip> = (0..optim.batch_size)
            .map(|_| &clips[rng.random_range(0..clips.len())])
            .collect();
        let noise = model.config().noise_std;
        let loss = train_step(model, oaae, &batch, noise, &mut rng, true)?;
        let value = to_f64_vec(&loss)?[0];
        if !value.is_finite() {
            return Err(Error::NonFinite {
                step,
                detail: format!("cross-entropy={value} variant={}", model.variant()),
            });
        }
        opt.backward_step(&loss)?;
        losses.push(value);
        on_step(step, value);
    }
    let probe_final = probe_loss(model, oaae, &probe)?;
    Ok(PredictorTrainLog { losses, probe_initial, probe_final })
}

impl Predictor {
    pub fn to_checkpoint(&self, config_hash: &str, oaae_hash: &str, log: Option<&PredictorTrainLog>) -> Result<Checkpoint> {
        let mut h = KvMap::new();
        h.insert("kind", "predictor");
        h.insert("variant", self.variant());
        h.insert("config_hash", config_hash);
        h.insert("oaae_config_hash", oaae_hash);
        h.extend(&self.config().to_kv().with_prefix("config."));
        let s = self.shape();
        h.insert("shape.slot_classes", format_list(&s.slot_classes));
        h.insert("shape.slot_dim", s.slot_dim);
        h.insert("shape.codebook_size", s.codebook_size);
        h.insert("shape.grid_side", s.grid_side);
        h.insert("shape.max_frames", s.max_frames);
        h.insert("step", log.map_or(0, |l| l.losses.len()));
        h.insert("loss_curve", format_list(log.map_or(&[][..], |l| &l.losses[..])));
        Checkpoint::from_store(h, self.store())
    }

    pub fn from_checkpoint(ck: &Checkpoint, expected_hash: &str, force: bool, dtype: DType) -> Result<Self> {
        if ck.kind() != Some("predictor") {
            return Err(Error::Missing(format!(
                "expected a predictor checkpoint, found kind {:?}",
                ck.kind()
            )));
        }
        ck.check_hash(expected_hash, force)?;
        let cfg_err = |e: String| Error::Config(vec![e]);
        let h = &ck.header;
        let variant: Variant = h.parse_value("variant").map_err(cfg_err)?;
        let config = PredictorConfig::from_kv(&h.section("config.")).map_err(cfg_err)?;
        let shape = PredictorShape {
            variant,
            slot_classes: h.parse_list("shape.slot_classes").map_err(cfg_err)?,
            slot_dim: h.parse_value("shape.slot_dim").map_err(cfg_err)?,
            codebook_size: h.parse_value("shape.codebook_size").map_err(cfg_err)?,
            grid_side: h.parse_value("shape.grid_side").map_err(cfg_err)?,
            max_frames: h.parse_value("shape.max_frames").map_err(cfg_err)?,
        };
        let model = Predictor::new(&config, &shape, dtype, 0)?;
        ck.load_into(model.store())?;
        Ok(model)
    }
}
