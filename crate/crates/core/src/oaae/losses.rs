use std::f64::consts::PI;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::nn::{to_f64_vec, StopGrad};

/// Real and imaginary parts of the orthonormal DFT matrix of size `n`.
fn dft_matrices(n: usize, dtype: DType, device: &Device) -> Result<(Tensor, Tensor)> {
    let scale = 1.0 / (n as f64).sqrt();
    let mut re = Vec::with_capacity(n * n);
    let mut im = Vec::with_capacity(n * n);
    for u in 0..n {
        for x in 0..n {
            let theta = 2.0 * PI * ((u * x) % n) as f64 / n as f64;
            re.push(scale * theta.cos());
            im.push(-scale * theta.sin());
        }
    }
    Ok((
        Tensor::from_vec(re, (n, n), device)?.to_dtype(dtype)?,
        Tensor::from_vec(im, (n, n), device)?.to_dtype(dtype)?,
    ))
}

/// Focal frequency loss between two `(B, C, H, W)` maps.
///
/// Each channel of `a − b` is taken to the frequency domain with an
/// orthonormal 2-D DFT. The squared spectral magnitude is weighted by the
/// magnitude itself, normalized so the largest frequency of each channel has
/// weight 1 (focal exponent 1; the weight carries no gradient), and averaged
/// over frequencies, channels and batch items.
pub fn ffl(a: &Tensor, b: &Tensor, sg: &mut StopGrad) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "ffl operands differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (n, c, h, w) = a.dims4()?;
    let (rh, ih) = dft_matrices(h, a.dtype(), a.device())?;
    let (rw, iw) = dft_matrices(w, a.dtype(), a.device())?;
    let x = (a - b)?;
    // F = M_h · X · M_wᵀ with M = R + iI (both symmetric).
    let xr = x.broadcast_matmul(&rw)?;
    let xi = x.broadcast_matmul(&iw)?;
    let re = (rh.broadcast_matmul(&xr)? - ih.broadcast_matmul(&xi)?)?;
    let im = (rh.broadcast_matmul(&xi)? + ih.broadcast_matmul(&xr)?)?;
    let power = (re.sqr()? + im.sqr()?)?;

    let mags: Vec<f64> = to_f64_vec(&power)?.into_iter().map(f64::sqrt).collect();
    let per_map = h * w;
    let mut weight = Vec::with_capacity(mags.len());
    for chunk in mags.chunks(per_map) {
        let max = chunk.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            weight.extend(chunk.iter().map(|m| m / max));
        } else {
            weight.extend(std::iter::repeat_n(0.0, chunk.len()));
        }
    }
    let weight = Tensor::from_vec(weight, (n, c, h, w), a.device())?.to_dtype(a.dtype())?;
    let weight = sg.detach(&weight)?;
    Ok((power * weight)?.mean_all()?)
}

/// Pixel-space MSE plus spectral FFL between a frame batch and its
/// reconstruction.
pub fn loss_recon(x: &Tensor, x_hat: &Tensor, sg: &mut StopGrad) -> Result<Tensor> {
    if x.dims() != x_hat.dims() {
        return Err(Error::Shape(format!(
            "reconstruction {:?} does not match input {:?}",
            x_hat.dims(),
            x.dims()
        )));
    }
    let mse = (x - x_hat)?.sqr()?.mean_all()?;
    Ok((mse + ffl(x, x_hat, sg)?)?)
}

/// Sum of FFL over paired (encoder, decoder) feature maps.
pub fn loss_feature(pairs: &[(Tensor, Tensor)], sg: &mut StopGrad) -> Result<Tensor> {
    let Some((a, _)) = pairs.first() else {
        return Err(Error::Shape("no feature pairs".into()));
    };
    let mut total = Tensor::zeros((), a.dtype(), a.device())?;
    for (f, g) in pairs {
        total = (total + ffl(f, g, sg)?)?;
    }
    Ok(total)
}

/// `‖sg[z] − e‖²` summed over channels, averaged over positions and batch
/// items. `z` and `e` are `(B, d, h', w')` for the instances of one slot (or
/// stacked slots, in which case the caller passes the number of batch items
/// so slot contributions add up).
pub fn loss_vq(z: &Tensor, e: &Tensor, batch: usize, sg: &mut StopGrad) -> Result<Tensor> {
    let zs = sg.detach(z)?;
    slot_sum(&(zs - e)?, batch)
}

/// `‖z − sg[e]‖²` with the same reduction as [`loss_vq`].
pub fn loss_commit(z: &Tensor, e: &Tensor, batch: usize, sg: &mut StopGrad) -> Result<Tensor> {
    let es = sg.detach(e)?;
    slot_sum(&(z - es)?, batch)
}

fn slot_sum(diff: &Tensor, batch: usize) -> Result<Tensor> {
    let (_, _, h, w) = diff.dims4()?;
    Ok((diff.sqr()?.sum_all()? / (batch * h * w) as f64)?)
}

/// The four loss components of the autoencoder objective.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTerms<T> {
    pub recon: T,
    pub feature: T,
    pub vq: T,
    pub commit: T,
}

impl LossTerms<f64> {
    /// `recon + α·feature + vq + β·commit`.
    pub fn total(&self, alpha: f64, beta: f64) -> f64 {
        self.recon + alpha * self.feature + self.vq + beta * self.commit
    }
}

impl LossTerms<Tensor> {
    pub fn total(&self, alpha: f64, beta: f64) -> Result<Tensor> {
        let t = (&self.recon + (&self.feature * alpha)?)?;
        let t = (t + &self.vq)?;
        Ok((t + (&self.commit * beta)?)?)
    }

    pub fn values(&self) -> Result<LossTerms<f64>> {
        let s = |t: &Tensor| -> Result<f64> { Ok(to_f64_vec(t)?[0]) };
        Ok(LossTerms {
            recon: s(&self.recon)?,
            feature: s(&self.feature)?,
            vq: s(&self.vq)?,
            commit: s(&self.commit)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: Vec<f64>, shape: (usize, usize, usize, usize)) -> Tensor {
        Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
    }

    fn scalar(x: &Tensor) -> f64 {
        x.to_scalar::<f64>().unwrap()
    }

    /// Direct evaluation of the DFT definition, independent of the matrix
    /// formulation above.
    fn ffl_oracle(a: &[f64], b: &[f64], c: usize, h: usize, w: usize) -> f64 {
        let mut total = 0.0;
        for ch in 0..c {
            let mut mags = Vec::new();
            for u in 0..h {
                for v in 0..w {
                    let (mut re, mut im) = (0.0, 0.0);
                    for y in 0..h {
                        for x in 0..w {
                            let i = ch * h * w + y * w + x;
                            let d = a[i] - b[i];
                            let ang = -2.0 * PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                            re += d * ang.cos();
                            im += d * ang.sin();
                        }
                    }
                    let norm = 1.0 / ((h * w) as f64).sqrt();
                    mags.push(((re * norm).powi(2) + (im * norm).powi(2)).sqrt());
                }
            }
            let max = mags.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                total += mags.iter().map(|m| (m / max) * m * m).sum::<f64>();
            }
        }
        total / (c * h * w) as f64
    }

    #[test]
    fn two_by_two_impulse() {
        let a = t(vec![1.0, 0.0, 0.0, 0.0], (1, 1, 2, 2));
        let b = t(vec![0.0; 4], (1, 1, 2, 2));
        let v = scalar(&ffl(&a, &b, &mut StopGrad::live()).unwrap());
        // Every bin of the orthonormal DFT of an impulse is 1/2.
        assert!((v - 0.25).abs() < 1e-12);
        assert!((v - ffl_oracle(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4], 1, 2, 2)).abs() < 1e-12);
    }

    #[test]
    fn matches_rustfft_spectrum() {
        use rustfft::{num_complex::Complex, FftPlanner};
        let (h, w) = (4, 8);
        let a: Vec<f64> = (0..h * w).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let b: Vec<f64> = (0..h * w).map(|i| ((i * 3) % 5) as f64 / 5.0).collect();
        let mut grid: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| Complex::new(x - y, 0.0)).collect();
        let mut planner = FftPlanner::new();
        let row = planner.plan_fft_forward(w);
        for r in grid.chunks_mut(w) {
            row.process(r);
        }
        let col = planner.plan_fft_forward(h);
        for x in 0..w {
            let mut c: Vec<_> = (0..h).map(|y| grid[y * w + x]).collect();
            col.process(&mut c);
            for y in 0..h {
                grid[y * w + x] = c[y];
            }
        }
        let mags: Vec<f64> = grid.iter().map(|z| z.norm() / ((h * w) as f64).sqrt()).collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let expect = mags.iter().map(|m| m / max * m * m).sum::<f64>() / (h * w) as f64;
        let got = scalar(&ffl(&t(a, (1, 1, h, w)), &t(b, (1, 1, h, w)), &mut StopGrad::live()).unwrap());
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn constant_offset_on_one_channel() {
        let (h, w) = (4, 4);
        let x: Vec<f64> = (0..3 * h * w).map(|i| (i % 5) as f64 / 10.0).collect();
        let mut y = x.clone();
        for v in &mut y[h * w..2 * h * w] {
            *v += 0.1;
        }
        let xt = t(x.clone(), (1, 3, h, w));
        let yt = t(y.clone(), (1, 3, h, w));
        let mse = scalar(&(&xt - &yt).unwrap().sqr().unwrap().mean_all().unwrap());
        assert!((mse - 0.01 / 3.0).abs() < 1e-12);
        let f = scalar(&ffl(&xt, &yt, &mut StopGrad::live()).unwrap());
        assert!((f - ffl_oracle(&x, &y, 3, h, w)).abs() < 1e-12);
        // All energy sits in the DC bin of the offset channel.
        assert!((f - 0.01 / 3.0).abs() < 1e-12);
        let r = scalar(&loss_recon(&xt, &yt, &mut StopGrad::live()).unwrap());
        assert!((r - 0.02 / 3.0).abs() < 1e-12);
        assert_eq!(scalar(&loss_recon(&xt, &xt, &mut StopGrad::live()).unwrap()), 0.0);
    }

    #[test]
    fn feature_loss_sums_pairs() {
        let a = t((0..16).map(|i| i as f64 / 16.0).collect(), (1, 1, 4, 4));
        let b = t((0..16).map(|i| (i * i % 7) as f64 / 7.0).collect(), (1, 1, 4, 4));
        let c = t(vec![0.5; 16], (1, 1, 4, 4));
        let sg = &mut StopGrad::live();
        let one = scalar(&loss_feature(&[(a.clone(), b.clone())], sg).unwrap());
        assert_eq!(one, scalar(&ffl(&a, &b, sg).unwrap()));
        let two = scalar(&loss_feature(&[(a.clone(), b.clone()), (c.clone(), a.clone())], sg).unwrap());
        let sep = scalar(&ffl(&a, &b, sg).unwrap()) + scalar(&ffl(&c, &a, sg).unwrap());
        assert!((two - sep).abs() < 1e-15);
        assert_eq!(scalar(&loss_feature(&[(a.clone(), a.clone())], sg).unwrap()), 0.0);
    }

    #[test]
    fn vq_and_commit_single_position() {
        let z = t(vec![1.0, 2.0, 3.0], (1, 3, 1, 1));
        let e = t(vec![0.5, 2.5, 2.0], (1, 3, 1, 1));
        let sg = &mut StopGrad::live();
        let expect = 0.25 + 0.25 + 1.0;
        assert!((scalar(&loss_vq(&z, &e, 1, sg).unwrap()) - expect).abs() < 1e-15);
        assert!((scalar(&loss_commit(&z, &e, 1, sg).unwrap()) - expect).abs() < 1e-15);
        assert_eq!(scalar(&loss_vq(&z, &z, 1, sg).unwrap()), 0.0);
    }

    #[test]
    fn total_is_affine_combination() {
        let terms = LossTerms { recon: 1.0, feature: 2.0, vq: 3.0, commit: 4.0 };
        assert_eq!(terms.total(0.5, 0.25), 6.0);
        assert_eq!(terms.total(0.0, 0.0), 4.0);
        let z = LossTerms { recon: 0.0, feature: 0.0, vq: 0.0, commit: 0.0 };
        assert_eq!(z.total(3.0, 7.0), 0.0);
        let s = |v: f64| Tensor::new(v, &Device::Cpu).unwrap();
        let tt = LossTerms { recon: s(1.0), feature: s(2.0), vq: s(3.0), commit: s(4.0) };
        assert_eq!(scalar(&tt.total(0.5, 0.25).unwrap()), 6.0);
    }

    proptest! {
        #[test]
        fn ffl_axioms(
            a in proptest::collection::vec(0.0f64..1.0, 2 * 4 * 4),
            b in proptest::collection::vec(0.0f64..1.0, 2 * 4 * 4),
        ) {
            let at = t(a.clone(), (1, 2, 4, 4));
            let bt = t(b.clone(), (1, 2, 4, 4));
            let sg = &mut StopGrad::live();
            let ab = scalar(&ffl(&at, &bt, sg).unwrap());
            let ba = scalar(&ffl(&bt, &at, sg).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert_eq!(scalar(&ffl(&at, &at, sg).unwrap()), 0.0);
            prop_assert!((ab - ffl_oracle(&a, &b, 2, 4, 4)).abs() < 1e-10);
        }

        #[test]
        fn mse_part_symmetric(
            a in proptest::collection::vec(0.0f64..1.0, 3 * 4 * 4),
            b in proptest::collection::vec(0.0f64..1.0, 3 * 4 * 4),
        ) {
            let at = t(a, (1, 3, 4, 4));
            let bt = t(b, (1, 3, 4, 4));
            let sg = &mut StopGrad::live();
            let r1 = scalar(&loss_recon(&at, &bt, sg).unwrap());
            let r2 = scalar(&loss_recon(&bt, &at, sg).unwrap());
            prop_assert!((r1 - r2).abs() <= 1e-12);
        }
    }
}
