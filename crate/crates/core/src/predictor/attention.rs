use candle_core::{Device, Tensor, D};

use crate::error::{Error, Result};
use crate::nn::{Linear, ParamStore};

/// Additive mask that hides future positions: entry (i, j) is 0 for j ≤ i
/// and −∞ otherwise.
pub fn causal_mask(len: usize, dtype: candle_core::DType, device: &Device) -> Result<Tensor> {
    let v: Vec<f32> = (0..len * len)
        .map(|p| if p % len > p / len { f32::NEG_INFINITY } else { 0.0 })
        .collect();
    Ok(Tensor::from_vec(v, (len, len), device)?.to_dtype(dtype)?)
}

/// Splits `(n, l, d)` into `(n, heads, l, d / heads)`.
fn split_heads(x: &Tensor, heads: usize) -> Result<Tensor> {
    let (n, l, d) = x.dims3()?;
    Ok(x.reshape((n, l, heads, d / heads))?.transpose(1, 2)?.contiguous()?)
}

fn merge_heads(x: &Tensor) -> Result<Tensor> {
    let (n, h, l, dh) = x.dims4()?;
    Ok(x.transpose(1, 2)?.reshape((n, l, h * dh))?)
}

/// Row-stochastic attention weights `softmax(q kᵀ / √d_k + mask)` for
/// head-split `(n, h, l, d_k)` inputs.
pub fn attention_weights(q: &Tensor, k: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
    let dk = *q.dims().last().unwrap_or(&1);
    let scores = (q.matmul(&k.transpose(2, 3)?.contiguous()?)? / (dk as f64).sqrt())?;
    let scores = match mask {
        Some(m) => scores.broadcast_add(m)?,
        None => scores,
    };
    Ok(candle_nn::ops::softmax(&scores, D::Minus1)?)
}

/// Multi-head scaled dot-product attention over already-projected
/// `(n, l, d)` queries, keys and values.
pub fn attend(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize, mask: Option<&Tensor>) -> Result<Tensor> {
    let (qh, kh, vh) = (split_heads(q, heads)?, split_heads(k, heads)?, split_heads(v, heads)?);
    let w = attention_weights(&qh, &kh, mask)?;
    merge_heads(&w.matmul(&vh)?)
}

/// Self-attention with its own query/key/value/output projections.
#[derive(Clone, Debug)]
pub struct SelfAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    heads: usize,
}

impl SelfAttention {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            q: Linear::new(ps, &format!("{name}.q"), dim, dim)?,
            k: Linear::new(ps, &format!("{name}.k"), dim, dim)?,
            v: Linear::new(ps, &format!("{name}.v"), dim, dim)?,
            out: Linear::new(ps, &format!("{name}.out"), dim, dim)?,
            heads,
        })
    }

    pub fn param_count(dim: usize) -> usize {
        4 * (dim * dim + dim)
    }

    /// `x` is `(n, l, d)`; attention runs along `l`.
    pub fn forward(&self, x: &Tensor, mask: Option<&Tensor>) -> Result<Tensor> {
        let o = attend(&self.q.forward(x)?, &self.k.forward(x)?, &self.v.forward(x)?, self.heads, mask)?;
        self.out.forward(&o)
    }

    /// The value projection followed by the output projection: what the
    /// module returns when every query sees a single key.
    pub fn value_path(&self, x: &Tensor) -> Result<Tensor> {
        self.out.forward(&self.v.forward(x)?)
    }
}

/// Cross-attention from one slot to every other slot. Projections belong to
/// the query slot's class; the per-source results are concatenated in slot
/// order and reduced back to the model width.
#[derive(Clone, Debug)]
pub struct CrossAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    reduce: Linear,
    heads: usize,
    n_sources: usize,
}

impl CrossAttention {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize, heads: usize, n_sources: usize) -> Result<Self> {
        if n_sources == 0 {
            return Err(Error::VariantMisuse(
                "cross-attention needs at least two slots".into(),
            ));
        }
        Ok(Self {
            q: Linear::new(ps, &format!("{name}.q"), dim, dim)?,
            k: Linear::new(ps, &format!("{name}.k"), dim, dim)?,
            v: Linear::new(ps, &format!("{name}.v"), dim, dim)?,
            reduce: Linear::new(ps, &format!("{name}.reduce"), n_sources * dim, dim)?,
            heads,
            n_sources,
        })
    }

    /// Parameters of one module with `n_sources` other slots.
    pub fn param_count(dim: usize, n_sources: usize) -> usize {
        3 * (dim * dim + dim) + n_sources * dim * dim + dim
    }

    /// Projected keys and values of a source slot.
    pub fn project_source(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((self.k.forward(x)?, self.v.forward(x)?))
    }

    /// Concatenation (before reduction) of the attention outputs for
    /// already-projected sources, `(n, l, n_sources · d)`.
    pub fn concat_segments(&self, query: &Tensor, sources: &[(Tensor, Tensor)], mask: Option<&Tensor>) -> Result<Tensor> {
        if sources.len() != self.n_sources {
            return Err(Error::Shape(format!(
                "cross-attention built for {} sources, got {}",
                self.n_sources,
                sources.len()
            )));
        }
        let q = self.q.forward(query)?;
        let parts = sources
            .iter()
            .map(|(k, v)| attend(&q, k, v, self.heads, mask))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::cat(&parts, D::Minus1)?)
    }

    pub fn reduce(&self, concat: &Tensor) -> Result<Tensor> {
        self.reduce.forward(concat)
    }

    /// `query` is `(n, l, d)`; `others` are the other slots in slot order.
    pub fn forward(&self, query: &Tensor, others: &[&Tensor], mask: Option<&Tensor>) -> Result<Tensor> {
        let sources = others
            .iter()
            .map(|x| self.project_source(x))
            .collect::<Result<Vec<_>>>()?;
        self.reduce(&self.concat_segments(query, &sources, mask)?)
    }
}
