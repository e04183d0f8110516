use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{to_f64_vec, StopGrad};

/// Index of the nearest codebook row (squared L2) for every feature row.
/// Ties resolve to the lowest index.
pub fn nearest_indices(features: &[f64], codebook: &[f64], dim: usize) -> Result<Vec<u32>> {
    if codebook.is_empty() || dim == 0 {
        return Err(Error::EmptyCodebook);
    }
    if features.len() % dim != 0 || codebook.len() % dim != 0 {
        return Err(Error::Shape(format!(
            "feature/codebook lengths ({}, {}) are not multiples of dim {dim}",
            features.len(),
            codebook.len()
        )));
    }
    Ok(features
        .chunks_exact(dim)
        .map(|f| {
            let mut best = (0u32, f64::INFINITY);
            for (j, e) in codebook.chunks_exact(dim).enumerate() {
                let dist: f64 = f.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.1 {
                    best = (j as u32, dist);
                }
            }
            best.0
        })
        .collect())
}

/// A class's codebook as plain values: `k` rows of `dim` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub class_id: usize,
    pub dim: usize,
    pub vectors: Vec<f64>,
}

impl Codebook {
    pub fn from_tensor(class_id: usize, t: &Tensor) -> Result<Self> {
        let (_, dim) = t.dims2()?;
        Ok(Self {
            class_id,
            dim,
            vectors: to_f64_vec(t)?,
        })
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.vectors.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    /// Quantizes an `h × w × dim` feature grid (row-major, channels last).
    pub fn quantize(
        &self,
        features: &[f64],
        height: usize,
        width: usize,
        slot_id: usize,
    ) -> Result<LatentTokenGrid> {
        if features.len() != height * width * self.dim {
            return Err(Error::Shape(format!(
                "feature grid has {} values, expected {height}x{width}x{}",
                features.len(),
                self.dim
            )));
        }
        let indices = nearest_indices(features, &self.vectors, self.dim)?;
        let vectors = indices
            .iter()
            .flat_map(|&i| self.row(i as usize).iter().copied())
            .collect();
        Ok(LatentTokenGrid {
            height,
            width,
            dim: self.dim,
            indices,
            vectors,
            class_id: self.class_id,
            slot_id,
        })
    }
}

/// Quantized latent of one instance: `h' × w'` codebook indices and the
/// selected vectors, channels last.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTokenGrid {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub indices: Vec<u32>,
    pub vectors: Vec<f64>,
    pub class_id: usize,
    pub slot_id: usize,
}

/// Channel-wise concatenation of per-slot grids in slot order, giving
/// `h' × w' × (N·d)` values, channels last.
pub fn concat_latents(grids: &[LatentTokenGrid]) -> Result<Vec<f64>> {
    let Some(first) = grids.first() else {
        return Err(Error::Shape("no latent grids to concatenate".into()));
    };
    for (k, g) in grids.iter().enumerate() {
        if g.slot_id != k {
            return Err(Error::SchemaMismatch(format!(
                "grid at position {k} belongs to slot {}",
                g.slot_id
            )));
        }
        if (g.height, g.width, g.dim) != (first.height, first.width, first.dim) {
            return Err(Error::Shape(format!(
                "slot {k} grid is {}x{}x{}, slot 0 is {}x{}x{}",
                g.height, g.width, g.dim, first.height, first.width, first.dim
            )));
        }
    }
    let cells = first.height * first.width;
    let d = first.dim;
    let mut out = Vec::with_capacity(cells * d * grids.len());
    for p in 0..cells {
        for g in grids {
            out.extend_from_slice(&g.vectors[p * d..(p + 1) * d]);
        }
    }
    Ok(out)
}

/// Result of quantizing a batch of encoder outputs.
pub struct Quantized {
    /// Straight-through output `z + sg(e − z)`, shaped like the input.
    pub z_q: Tensor,
    /// Selected codebook rows, shaped like the input (carries codebook
    /// gradients).
    pub e: Tensor,
    /// Chosen rows, ordered (item, row, column).
    pub indices: Vec<u32>,
}

/// Vector quantization of `z` shaped `(B, d, h', w')` against a `(K, d)`
/// codebook tensor, with the straight-through estimator.
pub fn quantize_st(z: &Tensor, codebook: &Tensor, sg: &mut StopGrad) -> Result<Quantized> {
    let (b, d, h, w) = z.dims4()?;
    let (k, cd) = codebook.dims2()?;
    if k == 0 {
        return Err(Error::EmptyCodebook);
    }
    if cd != d {
        return Err(Error::Shape(format!("features have {d} channels, codebook rows {cd}")));
    }
    let rows = z.permute((0, 2, 3, 1))?.reshape((b * h * w, d))?;
    let indices = sg.choice(|| {
        nearest_indices(&to_f64_vec(&rows)?, &to_f64_vec(codebook)?, d)
    })?;
    let idx = Tensor::from_slice(&indices, indices.len(), z.device())?;
    let e = codebook
        .index_select(&idx, 0)?
        .reshape((b, h, w, d))?
        .permute((0, 3, 1, 2))?
        .contiguous()?;
    let delta = sg.detach(&(&e - z)?)?;
    let z_q = (z + delta)?;
    Ok(Quantized { z_q, e, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};
    use proptest::prelude::*;

    #[test]
    fn exact_row_and_ties() {
        let cb = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0, -1.0, 0.0];
        assert_eq!(nearest_indices(&[5.0, 5.0], &cb, 2).unwrap(), vec![3]);
        // Equidistant from rows 1 and 4 -> lower index wins.
        assert_eq!(nearest_indices(&[0.0, 0.0], &[9.0, 9.0, 1.0, 0.0, 3.0, 3.0, 4.0, 4.0, -1.0, 0.0], 2).unwrap(), vec![1]);
        assert!(matches!(nearest_indices(&[0.0], &[], 1), Err(Error::EmptyCodebook)));
    }

    #[test]
    fn grid_vectors_come_from_codebook() {
        let cb = Codebook { class_id: 1, dim: 2, vectors: vec![0.0, 0.0, 1.0, 1.0] };
        let g = cb.quantize(&[0.9, 1.2, -0.1, 0.2], 1, 2, 3).unwrap();
        assert_eq!(g.indices, vec![1, 0]);
        for (p, &i) in g.indices.iter().enumerate() {
            assert_eq!(&g.vectors[p * 2..p * 2 + 2], cb.row(i as usize));
        }
        assert_eq!((g.class_id, g.slot_id), (1, 3));
    }

    fn grid(slot: usize, vals: Vec<f64>) -> LatentTokenGrid {
        LatentTokenGrid {
            height: 1,
            width: 2,
            dim: vals.len() / 2,
            indices: vec![0, 0],
            vectors: vals,
            class_id: 0,
            slot_id: slot,
        }
    }

    #[test]
    fn concat_layout_and_slicing() {
        let a = grid(0, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(concat_latents(std::slice::from_ref(&a)).unwrap(), a.vectors);
        let b = grid(1, vec![5.0, 6.0, 7.0, 8.0]);
        let j = concat_latents(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(j, vec![1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
        for (k, g) in [&a, &b].iter().enumerate() {
            let sliced: Vec<f64> = (0..2).flat_map(|p| j[p * 4 + k * 2..p * 4 + k * 2 + 2].to_vec()).collect();
            assert_eq!(sliced, g.vectors);
        }
        assert!(concat_latents(&[b, a]).is_err());
    }

    #[test]
    fn concat_channel_count() {
        let grids: Vec<_> = (0..3).map(|s| grid(s, vec![0.0; 32])).collect();
        assert_eq!(concat_latents(&grids).unwrap().len() / 2, 48);
    }

    #[test]
    fn straight_through_passes_gradient_unchanged() {
        let dev = Device::Cpu;
        let z = Var::from_tensor(&Tensor::new(&[[[[0.2f64, 0.9]], [[-0.4, 0.1]]]], &dev).unwrap()).unwrap();
        let cb = Tensor::new(&[[0.0f64, 0.0], [1.0, 0.0], [0.0, 1.0]], &dev).unwrap();
        let weights = Tensor::new(&[[[[0.3f64, -1.7]], [[2.0, 0.5]]]], &dev).unwrap();
        let mut sg = StopGrad::recording();
        let q = quantize_st(z.as_tensor(), &cb, &mut sg).unwrap();
        let loss = (q.z_q.sqr().unwrap() * &weights).unwrap().sum_all().unwrap();
        let grads = loss.backward().unwrap();
        let g_z = to_f64_vec(grads.get(z.as_tensor()).unwrap()).unwrap();
        // Gradient w.r.t. the quantized output: 2·z_q·weights.
        let zq = to_f64_vec(&q.z_q).unwrap();
        let w = to_f64_vec(&weights).unwrap();
        let g_q: Vec<f64> = zq.iter().zip(&w).map(|(a, b)| 2.0 * a * b).collect();
        // Central finite differences of the frozen-tape surrogate.
        let base = to_f64_vec(z.as_tensor()).unwrap();
        let h = 1e-6;
        for i in 0..base.len() {
            let eval = |delta: f64, sg: &mut StopGrad| {
                let mut v = base.clone();
                v[i] += delta;
                z.set(&Tensor::from_vec(v, (1, 2, 1, 2), &dev).unwrap()).unwrap();
                sg.rewind();
                let q = quantize_st(z.as_tensor(), &cb, sg).unwrap();
                (q.z_q.sqr().unwrap() * &weights).unwrap().sum_all().unwrap().to_scalar::<f64>().unwrap()
            };
            let fd = (eval(h, &mut sg) - eval(-h, &mut sg)) / (2.0 * h);
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
            assert!(rel(fd, g_z[i]) < 1e-4, "fd {fd} autograd {}", g_z[i]);
            assert!(rel(g_z[i], g_q[i]) < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn matches_exhaustive_oracle(
            feats in proptest::collection::vec(-2.0f64..2.0, 4 * 10),
            cb in proptest::collection::vec(-2.0f64..2.0, 4 * 7),
        ) {
            let got = nearest_indices(&feats, &cb, 4).unwrap();
            for (p, f) in feats.chunks(4).enumerate() {
                let dists: Vec<f64> = cb.chunks(4)
                    .map(|e| e.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum())
                    .collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let first = dists.iter().position(|&d| d == min).unwrap();
                prop_assert_eq!(got[p] as usize, first);
            }
        }
    }
}
