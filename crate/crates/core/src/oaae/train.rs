use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{OaaeConfig, OptimConfig};
use super::losses::LossTerms;
use super::model::{FrameBatch, Oaae};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::kv::{format_list, KvMap};
use crate::nn::StopGrad;
use crate::synthdata::{Clip, Frame, PanopticMask, SceneSchema};

/// Frames (with masks) available for autoencoder training or evaluation.
#[derive(Clone, Debug)]
pub struct FramePool {
    pub frames: Vec<Frame>,
    pub masks: Vec<PanopticMask>,
    pub n_slots: usize,
}

impl FramePool {
    pub fn from_clips<'a>(clips: impl IntoIterator<Item = &'a Clip>, n_slots: usize) -> Self {
        let mut frames = Vec::new();
        let mut masks = Vec::new();
        for clip in clips {
            frames.extend(clip.frames.iter().cloned());
            masks.extend(clip.masks.iter().cloned());
        }
        Self { frames, masks, n_slots }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn batch(&self, indices: &[usize], model: &Oaae) -> Result<FrameBatch> {
        let f: Vec<&Frame> = indices.iter().map(|&i| &self.frames[i]).collect();
        let m: Vec<&PanopticMask> = indices.iter().map(|&i| &self.masks[i]).collect();
        FrameBatch::new(&f, &m, self.n_slots, model.dtype())
    }

    /// Evenly spaced indices, used for a fixed evaluation batch.
    pub fn probe_indices(&self, n: usize) -> Vec<usize> {
        let n = n.min(self.len());
        (0..n).map(|i| i * self.len() / n).collect()
    }
}

/// What a training run records.
#[derive(Clone, Debug, PartialEq)]
pub struct OaaeTrainLog {
    /// Total loss of each step's minibatch.
    pub losses: Vec<f64>,
    /// Loss terms on the fixed probe batch before the first update.
    pub probe_initial: LossTerms<f64>,
    /// Loss terms on the same probe batch after the last update.
    pub probe_final: LossTerms<f64>,
}

pub const PROBE_BATCH: usize = 32;

fn probe(model: &Oaae, batch: &FrameBatch) -> Result<LossTerms<f64>> {
    model.forward(batch, &mut StopGrad::live())?.terms.values()
}

/// Minibatch Adam on the full objective. Minibatches are drawn uniformly
/// from `pool` with a ChaCha stream seeded by `seed`, so a run is a pure
/// function of its inputs.
pub fn train_oaae(
    model: &Oaae,
    pool: &FramePool,
    optim: &OptimConfig,
    seed: u64,
    mut on_step: impl FnMut(usize, f64),
) -> Result<OaaeTrainLog> {
    optim.validate("oaae_optim")?;
    if pool.is_empty() {
        return Err(Error::Missing("no frames to train the autoencoder on".into()));
    }
    let probe_batch = pool.batch(&pool.probe_indices(PROBE_BATCH), model)?;
    let probe_initial = probe(model, &probe_batch)?;
    let mut opt = AdamW::new(
        model.store().all_vars(),
        ParamsAdamW {
            lr: optim.learning_rate,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = Vec::with_capacity(optim.steps);
    for step in 0..optim.steps {
        let idx: Vec<usize> = (0..optim.batch_size)
            .map(|_| rng.random_range(0..pool.len()))
            .collect();
        let batch = pool.batch(&idx, model)?;
        let out = model.forward(&batch, &mut StopGrad::live())?;
        let terms = out.terms.values()?;
        let total = terms.total(model.config().alpha, model.config().beta);
        if !total.is_finite() {
            return Err(Error::NonFinite {
                step,
                detail: format!(
                    "recon={} feature={} vq={} commit={}",
                    terms.recon, terms.feature, terms.vq, terms.commit
                ),
            });
        }
        opt.backward_step(&out.total)?;
        losses.push(total);
        on_step(step, total);
    }
    let probe_final = probe(model, &probe_batch)?;
    Ok(OaaeTrainLog { losses, probe_initial, probe_final })
}

/// Header describing an autoencoder checkpoint.
pub fn oaae_header(model: &Oaae, config_hash: &str, log: Option<&OaaeTrainLog>) -> KvMap {
    let mut h = KvMap::new();
    h.insert("kind", "oaae");
    h.insert("config_hash", config_hash);
    h.extend(&model.config().to_kv().with_prefix("config."));
    h.extend(&model.schema().to_kv().with_prefix("schema."));
    h.insert("step", log.map_or(0, |l| l.losses.len()));
    h.insert("loss_curve", format_list(log.map_or(&[][..], |l| &l.losses[..])));
    h
}

impl Oaae {
    pub fn to_checkpoint(&self, config_hash: &str, log: Option<&OaaeTrainLog>) -> Result<Checkpoint> {
        Checkpoint::from_store(oaae_header(self, config_hash, log), self.store())
    }

    /// Rebuilds a model from a checkpoint, refusing one stamped with a
    /// different config hash unless `force`.
    pub fn from_checkpoint(
        ck: &Checkpoint,
        expected_hash: &str,
        force: bool,
        dtype: candle_core::DType,
    ) -> Result<Self> {
        if ck.kind() != Some("oaae") {
            return Err(Error::Missing(format!(
                "expected an autoencoder checkpoint, found kind {:?}",
                ck.kind()
            )));
        }
        ck.check_hash(expected_hash, force)?;
        let config = OaaeConfig::from_kv(&ck.header.section("config."))
            .map_err(|e| Error::Config(vec![e]))?;
        let schema = SceneSchema::from_kv(&ck.header.section("schema."))
            .map_err(|e| Error::Config(vec![e]))?;
        let model = Oaae::new(&config, &schema, dtype, 0)?;
        ck.load_into(model.store())?;
        Ok(model)
    }
}
