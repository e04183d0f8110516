use crate::error::{Error, Result};
use crate::synthdata::Frame;

/// PSNR reported for identical inputs and used as the ceiling whenever
/// values are aggregated.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Shape(format!(
            "metric inputs differ in size ({} vs {}) or are empty",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// `10·log10(max² / MSE)` in dB, capped at [`PSNR_CAP`].
pub fn psnr(x: &[f64], y: &[f64], max_value: f64) -> Result<f64> {
    same_len(x, y)?;
    let mse = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (max_value * max_value / mse).log10()).min(PSNR_CAP))
}

/// Unit-range values of an 8-bit frame, HWC.
pub fn frame_values(f: &Frame) -> Vec<f64> {
    f.data.iter().map(|&v| v as f64 / 255.0).collect()
}

pub fn psnr_frames(a: &Frame, b: &Frame) -> Result<f64> {
    psnr(&frame_values(a), &frame_values(b), 1.0)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter over the valid region of one `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|k| g[k] * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity of two `h × w × channels` images (HWC, unit
/// range): local statistics under an 11-tap Gaussian window (σ = 1.5) over
/// the valid region, averaged over positions and then over channels.
pub fn ssim(x: &[f64], y: &[f64], h: usize, w: usize, channels: usize) -> Result<f64> {
    same_len(x, y)?;
    if x.len() != h * w * channels {
        return Err(Error::Shape(format!(
            "{} values for a {h}x{w}x{channels} image",
            x.len()
        )));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let g = gaussian_window();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for c in 0..channels {
        let px: Vec<f64> = (0..h * w).map(|p| x[p * channels + c]).collect();
        let py: Vec<f64> = (0..h * w).map(|p| y[p * channels + c]).collect();
        let xx: Vec<f64> = px.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = py.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&px, h, w, &g);
        let my = filter_valid(&py, h, w, &g);
        let exx = filter_valid(&xx, h, w, &g);
        let eyy = filter_valid(&yy, h, w, &g);
        let exy = filter_valid(&xy, h, w, &g);
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let sx = exx[i] - ux * ux;
            let sy = eyy[i] - uy * uy;
            let sxy = exy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * sxy + c2)) / ((ux * ux + uy * uy + c1) * (sx + sy + c2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / channels as f64)
}

pub fn ssim_frames(a: &Frame, b: &Frame) -> Result<f64> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::Shape("frames differ in size".into()));
    }
    ssim(&frame_values(a), &frame_values(b), a.height, a.width, 3)
}
