use candle_core::{DType, Device, Tensor};

use super::config::OaaeConfig;
use super::losses::{loss_commit, loss_feature, loss_recon, loss_vq, LossTerms};
use super::quantize::{quantize_st, Codebook};
use crate::error::{Error, Result};
use crate::nn::{to_f64_vec, Conv2d, ConvTranspose2d, ParamStore, StopGrad};
use crate::synthdata::{Frame, PanopticMask, SceneSchema};

/// A batch of frames `(B, 3, h, w)` in `[0, 1]` with one-hot slot masks
/// `(B, N, h, w)`.
#[derive(Clone, Debug)]
pub struct FrameBatch {
    pub frames: Tensor,
    pub masks: Tensor,
}

impl FrameBatch {
    pub fn new(frames: &[&Frame], masks: &[&PanopticMask], n_slots: usize, dtype: DType) -> Result<Self> {
        if frames.len() != masks.len() || frames.is_empty() {
            return Err(Error::Shape(format!(
                "batch needs matching non-empty frame/mask lists (got {} and {})",
                frames.len(),
                masks.len()
            )));
        }
        let (h, w) = (frames[0].height, frames[0].width);
        let mut pix = Vec::with_capacity(frames.len() * 3 * h * w);
        let mut one_hot = vec![0f32; frames.len() * n_slots * h * w];
        for (b, (f, m)) in frames.iter().zip(masks).enumerate() {
            if (f.height, f.width, m.height, m.width) != (h, w, h, w) {
                return Err(Error::Shape("frames in a batch must share their size".into()));
            }
            for c in 0..3 {
                pix.extend(f.data.iter().skip(c).step_by(3).map(|&v| v as f32 / 255.0));
            }
            for (p, &id) in m.ids.iter().enumerate() {
                let id = id as usize;
                if id >= n_slots {
                    return Err(Error::SchemaMismatch(format!(
                        "mask references slot {id} but the schema has {n_slots}"
                    )));
                }
                one_hot[((b * n_slots) + id) * h * w + p] = 1.0;
            }
        }
        let dev = Device::Cpu;
        Ok(Self {
            frames: Tensor::from_vec(pix, (frames.len(), 3, h, w), &dev)?.to_dtype(dtype)?,
            masks: Tensor::from_vec(one_hot, (frames.len(), n_slots, h, w), &dev)?.to_dtype(dtype)?,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.dims()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same masks, different pixels (e.g. a noised copy).
    pub fn with_frames(&self, frames: Tensor) -> Self {
        Self {
            frames,
            masks: self.masks.clone(),
        }
    }
}

/// Converts a `(B, 3, h, w)` tensor back to 8-bit frames.
pub fn tensor_to_frames(t: &Tensor) -> Result<Vec<Frame>> {
    let (b, _, h, w) = t.dims4()?;
    let hwc = t.permute((0, 2, 3, 1))?.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    (0..b)
        .map(|i| Frame::from_unit(h, w, &hwc[i * h * w * 3..(i + 1) * h * w * 3]))
        .collect()
}

struct ResidualStack {
    layers: Vec<(Conv2d, Conv2d)>,
}

impl ResidualStack {
    fn new(ps: &mut ParamStore, name: &str, channels: usize, n: usize) -> Result<Self> {
        let layers = (0..n)
            .map(|i| {
                Ok((
                    Conv2d::new(ps, &format!("{name}.res{i}.a"), channels, channels, 3, 1, 1)?,
                    Conv2d::new(ps, &format!("{name}.res{i}.b"), channels, channels, 1, 1, 0)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut x = x.clone();
        for (a, b) in &self.layers {
            let h = b.forward(&a.forward(&x.relu()?)?.relu()?)?;
            x = (x + h)?;
        }
        Ok(x.relu()?)
    }
}

struct Encoder {
    stages: Vec<(Conv2d, Conv2d)>,
    res: ResidualStack,
    out: Conv2d,
}

impl Encoder {
    fn new(ps: &mut ParamStore, name: &str, cfg: &OaaeConfig, embed: usize) -> Result<Self> {
        let mut stages = Vec::new();
        let mut c_in = 3;
        for (l, &c) in cfg.hidden_dims.iter().enumerate() {
            stages.push((
                Conv2d::new(ps, &format!("{name}.stage{l}.conv"), c_in, c, 3, 1, 1)?,
                Conv2d::new(ps, &format!("{name}.stage{l}.down"), c, c, 4, 2, 1)?,
            ));
            c_in = c;
        }
        Ok(Self {
            stages,
            res: ResidualStack::new(ps, name, c_in, cfg.n_residual_layers)?,
            out: Conv2d::new(ps, &format!("{name}.out"), c_in, embed, 1, 1, 0)?,
        })
    }

    /// Pre-quantization features and the per-stage taps f_l (taken at
    /// stage resolution, before each downsampling).
    fn forward(&self, x: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let mut taps = Vec::with_capacity(self.stages.len());
        let mut h = x.clone();
        for (conv, down) in &self.stages {
            let f = conv.forward(&h)?.relu()?;
            h = down.forward(&f)?.relu()?;
            taps.push(f);
        }
        let z = self.out.forward(&self.res.forward(&h)?)?;
        Ok((z, taps))
    }
}

struct Decoder {
    input: Conv2d,
    res: ResidualStack,
    /// Upsampling convolution and frequency-complement block per stage,
    /// coarsest first.
    stages: Vec<(ConvTranspose2d, Conv2d)>,
    out: Conv2d,
}

impl Decoder {
    fn new(ps: &mut ParamStore, cfg: &OaaeConfig, joint: usize) -> Result<Self> {
        let hd = &cfg.hidden_dims;
        let top = *hd.last().expect("validated: at least one stage");
        let mut stages = Vec::new();
        let mut c_in = top;
        for j in 0..hd.len() {
            let c = hd[hd.len() - 1 - j];
            stages.push((
                ConvTranspose2d::new(ps, &format!("dec.up{j}"), c_in, c, 4, 2, 1)?,
                Conv2d::new(ps, &format!("dec.fcm{j}"), c, c, 3, 1, 1)?,
            ));
            c_in = c;
        }
        Ok(Self {
            input: Conv2d::new(ps, "dec.in", joint, top, 3, 1, 1)?,
            res: ResidualStack::new(ps, "dec", top, cfg.n_residual_layers)?,
            stages,
            out: Conv2d::new(ps, "dec.out", c_in, 3, 3, 1, 1)?,
        })
    }

    /// Reconstruction and decoder taps g, re-indexed so `taps[l]` pairs with
    /// encoder tap `l` (same resolution and channel count).
    fn forward(&self, z: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let mut h = self.res.forward(&self.input.forward(z)?)?;
        let mut taps = Vec::with_capacity(self.stages.len());
        for (up, fcm) in &self.stages {
            let u = up.forward(&h)?.relu()?;
            h = (&u + fcm.forward(&u)?)?;
            taps.push(h.clone());
        }
        taps.reverse();
        let x = candle_nn::ops::sigmoid(&self.out.forward(&h)?)?;
        Ok((x, taps))
    }
}

/// Everything one forward pass produces.
pub struct OaaeOutput {
    pub recon: Tensor,
    pub terms: LossTerms<Tensor>,
    pub total: Tensor,
    /// Chosen codebook rows per slot, ordered (batch item, row, column).
    pub indices: Vec<Vec<u32>>,
}

/// Object-aware autoencoder: one encoder and codebook per class over masked
/// instances, one joint decoder over the slot-ordered concatenation of their
/// quantized latents. Built with `decomposed = false` it becomes the
/// single-encoder baseline whose latent has the same total width.
pub struct Oaae {
    config: OaaeConfig,
    schema: SceneSchema,
    store: ParamStore,
    encoders: Vec<Encoder>,
    codebooks: Vec<Tensor>,
    decoder: Decoder,
    /// Slots handled by each encoder, in slot order.
    groups: Vec<usize>,
}

impl Oaae {
    pub fn new(config: &OaaeConfig, schema: &SceneSchema, dtype: DType, seed: u64) -> Result<Self> {
        config.validate(None)?;
        let mut ps = ParamStore::new(dtype, seed);
        let groups = if config.decomposed {
            schema.slots_per_class().to_vec()
        } else {
            vec![1]
        };
        let embed = config.encoder_embed_dim(schema);
        let k = config.codebook_size;
        let mut encoders = Vec::new();
        let mut codebooks = Vec::new();
        for c in 0..groups.len() {
            encoders.push(Encoder::new(&mut ps, &format!("enc{c}"), config, embed)?);
            codebooks.push(ps.uniform(&format!("codebook{c}"), &[k, embed], 1.0 / k as f64)?);
        }
        let decoder = Decoder::new(&mut ps, config, config.joint_dim(schema))?;
        Ok(Self {
            config: config.clone(),
            schema: schema.clone(),
            store: ps,
            encoders,
            codebooks,
            decoder,
            groups,
        })
    }

    pub fn config(&self) -> &OaaeConfig {
        &self.config
    }

    pub fn schema(&self) -> &SceneSchema {
        &self.schema
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    /// Number of token streams the predictor sees: N, or 1 without
    /// decomposition.
    pub fn n_token_slots(&self) -> usize {
        self.groups.iter().sum()
    }

    /// Codebook (class) used by each token stream.
    pub fn token_classes(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect()
    }

    pub fn codebook_size(&self) -> usize {
        self.config.codebook_size
    }

    /// Spatial side of the token grid for frames of side `resolution`.
    pub fn latent_side(&self, resolution: usize) -> usize {
        resolution / self.config.downsample_factor
    }

    pub fn codebook_tensor(&self, class_id: usize) -> Result<&Tensor> {
        self.codebooks.get(class_id).ok_or(Error::UnknownClass(class_id))
    }

    pub fn codebook(&self, class_id: usize) -> Result<Codebook> {
        Codebook::from_tensor(class_id, self.codebook_tensor(class_id)?)
    }

    /// Runs the encoder of `class_id` on `(B, 3, h, w)` instance pixels.
    /// Returns pre-quantization features `(B, d, h', w')` and stage taps.
    pub fn encode_instance(&self, pixels: &Tensor, class_id: usize) -> Result<(Tensor, Vec<Tensor>)> {
        let enc = self.encoders.get(class_id).ok_or(Error::UnknownClass(class_id))?;
        let (_, c, h, w) = pixels.dims4()?;
        let f = self.config.downsample_factor;
        if c != 3 || h % f != 0 || w % f != 0 {
            return Err(Error::Shape(format!(
                "instance input {:?} must be (B, 3, h, w) with h, w divisible by {f}",
                pixels.dims()
            )));
        }
        enc.forward(pixels)
    }

    /// Decodes a joint latent `(B, N·d, h', w')` into frames and taps.
    pub fn decode(&self, joint: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let want = self.config.joint_dim(&self.schema);
        let (_, c, _, _) = joint.dims4()?;
        if c != want {
            return Err(Error::Shape(format!("joint latent has {c} channels, decoder expects {want}")));
        }
        self.decoder.forward(joint)
    }

    /// Per-encoder input stacks `(B·n_c, 3, h, w)`, slot order within.
    fn instance_inputs(&self, batch: &FrameBatch) -> Result<Vec<Tensor>> {
        let (b, _, h, w) = batch.frames.dims4()?;
        if !self.config.decomposed {
            return Ok(vec![batch.frames.clone()]);
        }
        let n = self.schema.n_slots();
        if batch.masks.dims() != [b, n, h, w] {
            return Err(Error::SchemaMismatch(format!(
                "masks {:?} do not match {n} slots",
                batch.masks.dims()
            )));
        }
        let mut start = 0;
        let mut out = Vec::new();
        for &nc in &self.groups {
            let m = batch.masks.narrow(1, start, nc)?.unsqueeze(2)?;
            let inst = batch.frames.unsqueeze(1)?.broadcast_mul(&m)?;
            out.push(inst.reshape((b * nc, 3, h, w))?);
            start += nc;
        }
        Ok(out)
    }

    /// Full pass with every loss term.
    pub fn forward(&self, batch: &FrameBatch, sg: &mut StopGrad) -> Result<OaaeOutput> {
        let b = batch.len();
        let inputs = self.instance_inputs(batch)?;
        let mut joint_parts = Vec::new();
        let mut enc_taps = Vec::new();
        let mut vq_terms = Vec::new();
        let mut commit_terms = Vec::new();
        let mut group_indices = Vec::new();
        for (c, x) in inputs.iter().enumerate() {
            let nc = self.groups[c];
            let (z, taps) = self.encode_instance(x, c)?;
            let q = quantize_st(&z, &self.codebooks[c], sg)?;
            vq_terms.push(loss_vq(&z, &q.e, b, sg)?);
            commit_terms.push(loss_commit(&z, &q.e, b, sg)?);
            let (_, e, hh, ww) = q.z_q.dims4()?;
            joint_parts.push(q.z_q.reshape((b, nc * e, hh, ww))?);
            // A class's encoder maps are summed over its instances before
            // they are compared with the (joint) decoder maps.
            let summed = taps
                .into_iter()
                .map(|t| {
                    let (_, ch, th, tw) = t.dims4()?;
                    Ok(t.reshape((b, nc, ch, th, tw))?.sum(1)?)
                })
                .collect::<Result<Vec<_>>>()?;
            enc_taps.push(summed);
            group_indices.push((nc, hh * ww, q.indices));
        }
        let joint = Tensor::cat(&joint_parts, 1)?;
        let (recon, dec_taps) = self.decode(&joint)?;
        let mut pairs = Vec::new();
        for taps in &enc_taps {
            for (f, g) in taps.iter().zip(&dec_taps) {
                pairs.push((f.clone(), g.clone()));
            }
        }
        let sum = |v: Vec<Tensor>| -> Result<Tensor> {
            let mut it = v.into_iter();
            let first = it.next().expect("at least one encoder");
            it.try_fold(first, |acc, t| Ok((acc + t)?))
        };
        let terms = LossTerms {
            recon: loss_recon(&batch.frames, &recon, sg)?,
            feature: loss_feature(&pairs, sg)?,
            vq: sum(vq_terms)?,
            commit: sum(commit_terms)?,
        };
        let total = terms.total(self.config.alpha, self.config.beta)?;
        let mut indices = Vec::new();
        for (nc, cells, idx) in group_indices {
            for i in 0..nc {
                indices.push(
                    (0..b)
                        .flat_map(|bi| {
                            let start = (bi * nc + i) * cells;
                            idx[start..start + cells].iter().copied()
                        })
                        .collect(),
                );
            }
        }
        Ok(OaaeOutput { recon, terms, total, indices })
    }

    /// Token indices per slot stream, each ordered (batch item, row, column).
    pub fn encode_tokens(&self, batch: &FrameBatch) -> Result<Vec<Vec<u32>>> {
        let b = batch.len();
        let mut out = Vec::new();
        for (c, x) in self.instance_inputs(batch)?.iter().enumerate() {
            let nc = self.groups[c];
            let (z, _) = self.encode_instance(x, c)?;
            let (_, d, hh, ww) = z.dims4()?;
            let rows = z.permute((0, 2, 3, 1))?.reshape((b * nc * hh * ww, d))?;
            let cb = to_f64_vec(&self.codebooks[c])?;
            let idx = super::quantize::nearest_indices(&to_f64_vec(&rows)?, &cb, d)?;
            let cells = hh * ww;
            for i in 0..nc {
                out.push(
                    (0..b)
                        .flat_map(|bi| idx[(bi * nc + i) * cells..(bi * nc + i + 1) * cells].iter().copied())
                        .collect(),
                );
            }
        }
        Ok(out)
    }

    /// Decodes token streams (one per slot, each `batch · side²` indices)
    /// into `(B, 3, h, w)` frames.
    pub fn decode_tokens(&self, tokens: &[Vec<u32>], batch: usize, side: usize) -> Result<Tensor> {
        let classes = self.token_classes();
        if tokens.len() != classes.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} token streams for {} slots",
                tokens.len(),
                classes.len()
            )));
        }
        let k = self.config.codebook_size as u32;
        let mut parts = Vec::new();
        for (slot, (idx, &c)) in tokens.iter().zip(&classes).enumerate() {
            if idx.len() != batch * side * side {
                return Err(Error::Shape(format!(
                    "slot {slot}: {} tokens, expected {}",
                    idx.len(),
                    batch * side * side
                )));
            }
            if let Some(bad) = idx.iter().find(|&&i| i >= k) {
                return Err(Error::Shape(format!("slot {slot}: token {bad} outside codebook of {k}")));
            }
            let cb = &self.codebooks[c];
            let d = cb.dims()[1];
            let t = Tensor::from_slice(idx, idx.len(), cb.device())?;
            parts.push(
                cb.index_select(&t, 0)?
                    .reshape((batch, side, side, d))?
                    .permute((0, 3, 1, 2))?,
            );
        }
        let joint = Tensor::cat(&parts, 1)?.contiguous()?;
        Ok(self.decode(&joint)?.0)
    }

    /// Reconstruction through quantization, without losses.
    pub fn reconstruct(&self, batch: &FrameBatch) -> Result<Tensor> {
        let side = self.latent_side(batch.frames.dims()[2]);
        let tokens = self.encode_tokens(batch)?;
        self.decode_tokens(&tokens, batch.len(), side)
    }
}

/// The single-encoder autoencoder used by the monolithic predictor: raw
/// frames in, one codebook with `N·d`-wide entries.
pub fn build_sis_autoencoder(config: &OaaeConfig, schema: &SceneSchema, dtype: DType, seed: u64) -> Result<Oaae> {
    if config.decomposed {
        return Err(Error::VariantMisuse(
            "single-encoder autoencoder requires decomposed = false".into(),
        ));
    }
    Oaae::new(config, schema, dtype, seed)
}
