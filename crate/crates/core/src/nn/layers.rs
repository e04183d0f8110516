use candle_core::{DType, Tensor, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ParamStore;
use crate::error::Result;

/// Affine map over the last axis: `y = x Wᵀ + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    weight: Tensor,
    bias: Option<Tensor>,
}

impl Linear {
    pub fn new(ps: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let bound = 1.0 / (d_in as f64).sqrt();
        let weight = ps.uniform(&format!("{name}.weight"), &[d_out, d_in], bound)?;
        let bias = Some(ps.uniform(&format!("{name}.bias"), &[d_out], bound)?);
        Ok(Self { weight, bias })
    }

    pub fn no_bias(ps: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let bound = 1.0 / (d_in as f64).sqrt();
        let weight = ps.uniform(&format!("{name}.weight"), &[d_out, d_in], bound)?;
        Ok(Self { weight, bias: None })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let d_in = *dims.last().expect("linear input has rank >= 1");
        let rows = x.elem_count() / d_in.max(1);
        let y = x.reshape((rows, d_in))?.matmul(&self.weight.t()?)?;
        let y = match &self.bias {
            Some(b) => y.broadcast_add(b)?,
            None => y,
        };
        let mut out = dims;
        *out.last_mut().unwrap() = self.weight.dim(0)?;
        Ok(y.reshape(out)?)
    }
}

/// 2-D convolution over NCHW tensors.
#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let bound = 1.0 / ((c_in * kernel * kernel) as f64).sqrt();
        let weight = ps.uniform(&format!("{name}.weight"), &[c_out, c_in, kernel, kernel], bound)?;
        let bias = ps.uniform(&format!("{name}.bias"), &[c_out], bound)?;
        Ok(Self { weight, bias, stride, padding })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        let b = self.bias.reshape((1, self.bias.dim(0)?, 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

/// Transposed 2-D convolution over NCHW tensors.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl ConvTranspose2d {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let bound = 1.0 / ((c_out * kernel * kernel) as f64).sqrt();
        let weight = ps.uniform(&format!("{name}.weight"), &[c_in, c_out, kernel, kernel], bound)?;
        let bias = ps.uniform(&format!("{name}.bias"), &[c_out], bound)?;
        Ok(Self { weight, bias, stride, padding })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv_transpose2d(&self.weight, self.padding, 0, self.stride, 1)?;
        let b = self.bias.reshape((1, self.bias.dim(0)?, 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

/// Layer normalization over the last axis with learned gain and shift.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    gain: Tensor,
    shift: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gain: ps.constant(&format!("{name}.gain"), &[dim], 1.0)?,
            shift: ps.constant(&format!("{name}.shift"), &[dim], 0.0)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.gain)?.broadcast_add(&self.shift)?)
    }
}

/// Lookup table of learned vectors.
#[derive(Clone, Debug)]
pub struct Embedding {
    table: Tensor,
}

impl Embedding {
    pub fn new(ps: &mut ParamStore, name: &str, n: usize, dim: usize) -> Result<Self> {
        Ok(Self { table: ps.normal(&format!("{name}.table"), &[n, dim], 0.02)? })
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// Rows for `ids`, shaped `[ids.len(), dim]`.
    pub fn lookup(&self, ids: &[u32]) -> Result<Tensor> {
        let idx = Tensor::from_slice(ids, ids.len(), self.table.device())?;
        Ok(self.table.index_select(&idx, 0)?)
    }
}

/// Inverted dropout with an explicit, seeded random stream.
#[derive(Clone, Copy, Debug)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Self {
        Self { p }
    }

    /// Identity when `rng` is `None` (evaluation) or `p == 0`.
    pub fn forward(&self, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let Some(rng) = rng else { return Ok(x.clone()) };
        if self.p <= 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - self.p;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.elem_count())
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        let mask = Tensor::from_vec(mask, x.dims(), x.device())?.to_dtype(x.dtype())?;
        Ok(x.mul(&mask)?)
    }
}

/// Two-layer perceptron with GELU and dropout.
#[derive(Clone, Debug)]
pub struct FeedForward {
    up: Linear,
    down: Linear,
    dropout: Dropout,
}

impl FeedForward {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize, hidden: usize, dropout: f64) -> Result<Self> {
        Ok(Self {
            up: Linear::new(ps, &format!("{name}.up"), dim, hidden)?,
            down: Linear::new(ps, &format!("{name}.down"), hidden, dim)?,
            dropout: Dropout::new(dropout),
        })
    }

    /// Parameters of a feed-forward with these widths.
    pub fn param_count(dim: usize, hidden: usize) -> usize {
        2 * dim * hidden + hidden + dim
    }

    pub fn forward(&self, x: &Tensor, mut rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let h = self.up.forward(x)?.gelu_erf()?;
        let h = self.dropout.forward(&h, rng.as_deref_mut())?;
        let y = self.down.forward(&h)?;
        self.dropout.forward(&y, rng)
    }
}


#[allow(dead_code)]
pub(crate) fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::to_f64_vec;
    use candle_core::Device;
    use rand::SeedableRng;

    #[test]
    fn linear_matches_manual_product() {
        let mut ps = ParamStore::new(DType::F64, 3);
        let lin = Linear::new(&mut ps, "l", 3, 2).unwrap();
        let x = Tensor::new(&[[[1.0f64, 2.0, 3.0]]], &Device::Cpu).unwrap();
        let y = to_f64_vec(&lin.forward(&x).unwrap()).unwrap();
        let w = to_f64_vec(ps.get("l.weight").unwrap().as_tensor()).unwrap();
        let b = to_f64_vec(ps.get("l.bias").unwrap().as_tensor()).unwrap();
        for o in 0..2 {
            let e = b[o] + (0..3).map(|i| w[o * 3 + i] * (i + 1) as f64).sum::<f64>();
            assert!((y[o] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_shapes() {
        let mut ps = ParamStore::new(DType::F32, 0);
        let down = Conv2d::new(&mut ps, "c", 3, 8, 4, 2, 1).unwrap();
        let up = ConvTranspose2d::new(&mut ps, "t", 8, 3, 4, 2, 1).unwrap();
        let x = Tensor::zeros((2, 3, 16, 16), DType::F32, &Device::Cpu).unwrap();
        let h = down.forward(&x).unwrap();
        assert_eq!(h.dims(), &[2, 8, 8, 8]);
        assert_eq!(up.forward(&h).unwrap().dims(), &[2, 3, 16, 16]);
    }

    #[test]
    fn layer_norm_standardizes() {
        let mut ps = ParamStore::new(DType::F64, 0);
        let ln = LayerNorm::new(&mut ps, "ln", 4).unwrap();
        let x = Tensor::new(&[[1.0f64, 2.0, 3.0, 10.0]], &Device::Cpu).unwrap();
        let y = to_f64_vec(&ln.forward(&x).unwrap()).unwrap();
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dropout_is_seeded_and_unbiased() {
        let x = Tensor::ones(10_000, DType::F64, &Device::Cpu).unwrap();
        let d = Dropout::new(0.3);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = to_f64_vec(&d.forward(&x, Some(&mut r1)).unwrap()).unwrap();
        let b = to_f64_vec(&d.forward(&x, Some(&mut r2)).unwrap()).unwrap();
        assert_eq!(a, b);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
        assert_eq!(to_f64_vec(&d.forward(&x, None).unwrap()).unwrap(), vec![1.0; 10_000]);
    }

    #[test]
    fn feed_forward_count_matches_store() {
        let mut ps = ParamStore::new(DType::F32, 0);
        FeedForward::new(&mut ps, "ff", 6, 11, 0.0).unwrap();
        assert_eq!(ps.count(), FeedForward::param_count(6, 11));
    }
}
