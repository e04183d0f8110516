use candle_core::{DType, Tensor};
use rand_chacha::ChaCha8Rng;

use super::attention::{causal_mask, CrossAttention, SelfAttention};
use super::config::{PredictorConfig, Variant};
use crate::error::{Error, Result};
use crate::nn::{Dropout, Embedding, FeedForward, LayerNorm, Linear, ParamStore};
use crate::oaae::OaaeConfig;
use crate::synthdata::SceneSchema;

/// Token-stream layout a predictor is built for.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorShape {
    pub variant: Variant,
    /// Class (codebook) of every slot stream, in slot order.
    pub slot_classes: Vec<usize>,
    /// Width of every slot stream.
    pub slot_dim: usize,
    pub codebook_size: usize,
    /// Side of the square token grid.
    pub grid_side: usize,
    /// Longest sequence the temporal position table covers.
    pub max_frames: usize,
}

impl PredictorShape {
    pub fn n_slots(&self) -> usize {
        self.slot_classes.len()
    }

    pub fn n_classes(&self) -> usize {
        self.slot_classes.iter().max().map_or(0, |m| m + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.grid_side * self.grid_side
    }
}

/// Hidden width of the feed-forward that stands in for the two
/// cross-attention modules, chosen so the parameter counts match as closely
/// as integer widths allow.
pub fn matched_ff_hidden(dim: usize, n_slots: usize) -> usize {
    let target = 2 * CrossAttention::param_count(dim, n_slots - 1);
    let h = ((target as f64 - dim as f64) / (2 * dim + 1) as f64).round();
    (h as usize).max(1)
}

struct CrossPair {
    ln_s: LayerNorm,
    spatial: CrossAttention,
    ln_t: LayerNorm,
    temporal: CrossAttention,
}

struct Block {
    ln_s: LayerNorm,
    attn_s: SelfAttention,
    ln_t: LayerNorm,
    attn_t: SelfAttention,
    cross: Option<CrossPair>,
    extra_ff: Option<(LayerNorm, FeedForward)>,
    ln_f: LayerNorm,
    ff: FeedForward,
}

struct ClassStack {
    embed: Embedding,
    blocks: Vec<Block>,
    ln_out: LayerNorm,
    head: Linear,
}

/// Factored spatial/temporal transformer over per-slot token grids.
///
/// Every class owns its token embedding, blocks and output head; slots of a
/// class share them. Positional tables are shared by all slots.
pub struct Predictor {
    config: PredictorConfig,
    shape: PredictorShape,
    store: ParamStore,
    classes: Vec<ClassStack>,
    pos_time: Tensor,
    pos_space: Tensor,
    dropout: Dropout,
}

fn over_axis(x: &Tensor, f: impl FnOnce(&Tensor) -> Result<Tensor>, temporal: bool) -> Result<Tensor> {
    let (b, t, s, d) = x.dims4()?;
    if temporal {
        let y = x.permute((0, 2, 1, 3))?.contiguous()?.reshape((b * s, t, d))?;
        Ok(f(&y)?.reshape((b, s, t, d))?.permute((0, 2, 1, 3))?.contiguous()?)
    } else {
        Ok(f(&x.reshape((b * t, s, d))?)?.reshape((b, t, s, d))?)
    }
}

impl Predictor {
    pub fn new(config: &PredictorConfig, shape: &PredictorShape, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = shape.n_slots();
        if n == 0 {
            return Err(Error::Shape("predictor needs at least one slot".into()));
        }
        match shape.variant {
            Variant::Scat if n < 2 => {
                return Err(Error::VariantMisuse(format!(
                    "SCAT needs at least two slots, the schema has {n}"
                )))
            }
            Variant::Sis if n != 1 => {
                return Err(Error::VariantMisuse(format!(
                    "SiS uses a single slot, got {n}"
                )))
            }
            _ => {}
        }
        let dim = shape.slot_dim;
        if dim % config.n_heads != 0 {
            return Err(Error::Config(vec![format!(
                "slot width {dim} is not divisible by {} heads",
                config.n_heads
            )]));
        }
        let heads = config.n_heads;
        let mut ps = ParamStore::new(dtype, seed);
        let mut classes = Vec::new();
        for c in 0..shape.n_classes() {
            let p = format!("cls{c}");
            let embed = Embedding::new(&mut ps, &format!("{p}.embed"), shape.codebook_size, dim)?;
            let mut blocks = Vec::new();
            for l in 0..config.depth {
                let b = format!("{p}.blk{l}");
                let cross = if shape.variant == Variant::Scat {
                    Some(CrossPair {
                        ln_s: LayerNorm::new(&mut ps, &format!("{b}.ln_cs"), dim)?,
                        spatial: CrossAttention::new(&mut ps, &format!("{b}.cross_s"), dim, heads, n - 1)?,
                        ln_t: LayerNorm::new(&mut ps, &format!("{b}.ln_ct"), dim)?,
                        temporal: CrossAttention::new(&mut ps, &format!("{b}.cross_t"), dim, heads, n - 1)?,
                    })
                } else {
                    None
                };
                let extra_ff = if shape.variant == Variant::Sncat {
                    let hidden = matched_ff_hidden(dim, n.max(2));
                    Some((
                        LayerNorm::new(&mut ps, &format!("{b}.ln_xff"), dim)?,
                        FeedForward::new(&mut ps, &format!("{b}.xff"), dim, hidden, config.dropout)?,
                    ))
                } else {
                    None
                };
                blocks.push(Block {
                    ln_s: LayerNorm::new(&mut ps, &format!("{b}.ln_s"), dim)?,
                    attn_s: SelfAttention::new(&mut ps, &format!("{b}.attn_s"), dim, heads)?,
                    ln_t: LayerNorm::new(&mut ps, &format!("{b}.ln_t"), dim)?,
                    attn_t: SelfAttention::new(&mut ps, &format!("{b}.attn_t"), dim, heads)?,
                    cross,
                    extra_ff,
                    ln_f: LayerNorm::new(&mut ps, &format!("{b}.ln_f"), dim)?,
                    ff: FeedForward::new(&mut ps, &format!("{b}.ff"), dim, dim * config.ff_expansion, config.dropout)?,
                });
            }
            classes.push(ClassStack {
                embed,
                blocks,
                ln_out: LayerNorm::new(&mut ps, &format!("{p}.ln_out"), dim)?,
                head: Linear::new(&mut ps, &format!("{p}.head"), dim, shape.codebook_size)?,
            });
        }
        let pos_time = ps.normal("pos.time", &[shape.max_frames, dim], 0.02)?;
        let pos_space = ps.normal("pos.space", &[shape.n_cells(), dim], 0.02)?;
        Ok(Self {
            config: config.clone(),
            shape: shape.clone(),
            store: ps,
            classes,
            pos_time,
            pos_space,
            dropout: Dropout::new(config.dropout),
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn shape(&self) -> &PredictorShape {
        &self.shape
    }

    pub fn variant(&self) -> Variant {
        self.shape.variant
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    /// Exact number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    /// Embeds `(B, t, S)` token tensors (one per slot) to `(B, t, S, D)`.
    pub fn embed(&self, tokens: &[Tensor]) -> Result<Vec<Tensor>> {
        if tokens.len() != self.shape.n_slots() {
            return Err(Error::SchemaMismatch(format!(
                "{} token streams for a {}-slot predictor",
                tokens.len(),
                self.shape.n_slots()
            )));
        }
        tokens
            .iter()
            .zip(&self.shape.slot_classes)
            .map(|(tok, &c)| {
                let (b, t, s) = tok.dims3()?;
                if s != self.shape.n_cells() {
                    return Err(Error::Shape(format!(
                        "token grid has {s} cells, predictor expects {}",
                        self.shape.n_cells()
                    )));
                }
                let table = self.classes[c].embed.table();
                Ok(table
                    .index_select(&tok.flatten_all()?, 0)?
                    .reshape((b, t, s, self.shape.slot_dim))?)
            })
            .collect()
    }

    /// Adds the shared temporal and spatial position tables.
    pub fn add_positional(&self, xs: &[Tensor]) -> Result<Vec<Tensor>> {
        xs.iter()
            .map(|x| {
                let (_, t, s, d) = x.dims4()?;
                if t > self.shape.max_frames {
                    return Err(Error::Shape(format!(
                        "sequence of {t} frames exceeds the configured maximum {}",
                        self.shape.max_frames
                    )));
                }
                let time = self.pos_time.narrow(0, 0, t)?.reshape((1, t, 1, d))?;
                let space = self.pos_space.reshape((1, 1, s, d))?;
                Ok(x.broadcast_add(&time)?.broadcast_add(&space)?)
            })
            .collect()
    }

    /// Logits `(B, t, S, K)` per slot from integer tokens.
    pub fn forward(&self, tokens: &[Tensor], rng: Option<&mut ChaCha8Rng>) -> Result<Vec<Tensor>> {
        let xs = self.add_positional(&self.embed(tokens)?)?;
        self.forward_embedded(xs, rng)
    }

    /// Transformer stack and heads on embedded, positioned inputs.
    pub fn forward_embedded(&self, mut xs: Vec<Tensor>, mut rng: Option<&mut ChaCha8Rng>) -> Result<Vec<Tensor>> {
        let (_, t, _, _) = xs[0].dims4()?;
        let mask = causal_mask(t, xs[0].dtype(), xs[0].device())?;
        let classes = &self.shape.slot_classes;
        for l in 0..self.config.depth {
            for (k, x) in xs.iter_mut().enumerate() {
                let blk = &self.classes[classes[k]].blocks[l];
                let h = over_axis(&blk.ln_s.forward(x)?, |y| blk.attn_s.forward(y, None), false)?;
                *x = (&*x + self.dropout.forward(&h, rng.as_deref_mut())?)?;
                let h = over_axis(&blk.ln_t.forward(x)?, |y| blk.attn_t.forward(y, Some(&mask)), true)?;
                *x = (&*x + self.dropout.forward(&h, rng.as_deref_mut())?)?;
            }
            if self.shape.variant == Variant::Scat {
                xs = self.cross_step(&xs, l, false, &mask, rng.as_deref_mut())?;
                xs = self.cross_step(&xs, l, true, &mask, rng.as_deref_mut())?;
            }
            for (k, x) in xs.iter_mut().enumerate() {
                let blk = &self.classes[classes[k]].blocks[l];
                if let Some((ln, ff)) = &blk.extra_ff {
                    let h = ff.forward(&ln.forward(x)?, rng.as_deref_mut())?;
                    *x = (&*x + h)?;
                }
                let h = blk.ff.forward(&blk.ln_f.forward(x)?, rng.as_deref_mut())?;
                *x = (&*x + h)?;
            }
        }
        xs.iter()
            .zip(classes)
            .map(|(x, &c)| {
                let cls = &self.classes[c];
                cls.head.forward(&cls.ln_out.forward(x)?)
            })
            .collect()
    }

    /// One cross-attention sub-layer for every slot, all reading the same
    /// pre-update states.
    fn cross_step(
        &self,
        xs: &[Tensor],
        layer: usize,
        temporal: bool,
        mask: &Tensor,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Tensor>> {
        let classes = &self.shape.slot_classes;
        let pick = |k: usize| {
            let pair = self.classes[classes[k]].blocks[layer]
                .cross
                .as_ref()
                .expect("cross-attention present in SCAT blocks");
            if temporal {
                (&pair.ln_t, &pair.temporal)
            } else {
                (&pair.ln_s, &pair.spatial)
            }
        };
        let normed = xs
            .iter()
            .enumerate()
            .map(|(k, x)| pick(k).0.forward(x))
            .collect::<Result<Vec<_>>>()?;
        let (b, t, s, d) = xs[0].dims4()?;
        let flat = |x: &Tensor| -> Result<Tensor> {
            if temporal {
                Ok(x.permute((0, 2, 1, 3))?.contiguous()?.reshape((b * s, t, d))?)
            } else {
                Ok(x.reshape((b * t, s, d))?)
            }
        };
        let unflat = |y: Tensor| -> Result<Tensor> {
            if temporal {
                Ok(y.reshape((b, s, t, d))?.permute((0, 2, 1, 3))?.contiguous()?)
            } else {
                Ok(y.reshape((b, t, s, d))?)
            }
        };
        let flats = normed.iter().map(flat).collect::<Result<Vec<_>>>()?;
        let m = if temporal { Some(mask) } else { None };
        let mut out = Vec::with_capacity(xs.len());
        for (k, x) in xs.iter().enumerate() {
            let others: Vec<&Tensor> = flats
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, f)| f)
                .collect();
            let h = unflat(pick(k).1.forward(&flats[k], &others, m)?)?;
            out.push((x + self.dropout.forward(&h, rng.as_deref_mut())?)?);
        }
        Ok(out)
    }
}

/// Builds a predictor variant for a dataset schema and its autoencoder.
///
/// SCAT and SNCAT get one stream per slot at the per-instance width and
/// class-shared weights; SiS gets a single stream of width `N ·
/// model_dim` with the same depth and head count.
#[allow(clippy::too_many_arguments)]
pub fn build_variant(
    variant: Variant,
    schema: &SceneSchema,
    oaae: &OaaeConfig,
    config: &PredictorConfig,
    resolution: usize,
    max_frames: usize,
    dtype: DType,
    seed: u64,
) -> Result<Predictor> {
    let shape = variant_shape(variant, schema, oaae, config, resolution, max_frames);
    Predictor::new(config, &shape, dtype, seed)
}

pub fn variant_shape(
    variant: Variant,
    schema: &SceneSchema,
    oaae: &OaaeConfig,
    config: &PredictorConfig,
    resolution: usize,
    max_frames: usize,
) -> PredictorShape {
    let (slot_classes, slot_dim) = match variant {
        Variant::Sis => (vec![0], schema.n_slots() * config.model_dim),
        _ => (schema.slot_classes(), config.model_dim),
    };
    PredictorShape {
        variant,
        slot_classes,
        slot_dim,
        codebook_size: oaae.codebook_size,
        grid_side: resolution / oaae.downsample_factor,
        max_frames,
    }
}

/// Exact trainable parameter count of a built model.
pub fn count_parameters(model: &Predictor) -> usize {
    model.param_count()
}
