use std::fmt::Write as _;

use super::quality::{psnr_frames, ssim_frames};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::synthdata::{ClipTracks, Frame};

/// Quality of one predicted frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameScore {
    pub time: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Mean and spread computed from per-subset means.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetStats {
    pub subset_means: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the subset means.
    pub std: f64,
}

/// Splits per-clip values into `n_subsets` groups by `clip_id mod
/// n_subsets`, averages each non-empty group, and reports the mean and
/// standard deviation of those group means.
pub fn aggregate_subsets(values: &[f64], clip_ids: &[usize], n_subsets: usize) -> Result<SubsetStats> {
    if values.len() != clip_ids.len() || values.is_empty() || n_subsets == 0 {
        return Err(Error::Shape(format!(
            "{} values for {} clip ids across {n_subsets} subsets",
            values.len(),
            clip_ids.len()
        )));
    }
    let mut sums = vec![0.0; n_subsets];
    let mut counts = vec![0usize; n_subsets];
    for (&v, &id) in values.iter().zip(clip_ids) {
        sums[id % n_subsets] += v;
        counts[id % n_subsets] += 1;
    }
    let subset_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let n = subset_means.len() as f64;
    let mean = subset_means.iter().sum::<f64>() / n;
    let std = (subset_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SubsetStats { subset_means, mean, std })
}

/// Aggregates for one sampling temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureSummary {
    pub temperature: f64,
    pub psnr: SubsetStats,
    pub ssim: SubsetStats,
    /// Per predicted time step: subset statistics of PSNR and SSIM.
    pub psnr_curve: Vec<SubsetStats>,
    pub ssim_curve: Vec<SubsetStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub clip_ids: Vec<usize>,
    /// `scores[temperature][clip][step]`.
    pub scores: Vec<Vec<Vec<FrameScore>>>,
    pub summaries: Vec<TemperatureSummary>,
    /// Index into `summaries` of the temperature with the highest mean PSNR
    /// (earliest on ties); likewise for SSIM.
    pub best_psnr: usize,
    pub best_ssim: usize,
}

impl EvalReport {
    pub fn best_psnr_summary(&self) -> &TemperatureSummary {
        &self.summaries[self.best_psnr]
    }

    pub fn best_ssim_summary(&self) -> &TemperatureSummary {
        &self.summaries[self.best_ssim]
    }
}

fn best_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Scores predictions against ground truth for every temperature.
///
/// `predictions[τ][clip]` and `ground_truth[clip]` hold the predicted
/// horizon frames; `clip_ids` are the dataset indices of the clips (they
/// decide subset membership).
pub fn evaluate(
    predictions: &[Vec<Vec<Frame>>],
    ground_truth: &[Vec<Frame>],
    clip_ids: &[usize],
    temperatures: &[f64],
    n_subsets: usize,
    exec: Execution,
) -> Result<EvalReport> {
    if predictions.len() != temperatures.len() || temperatures.is_empty() {
        return Err(Error::Shape(format!(
            "{} prediction sets for {} temperatures",
            predictions.len(),
            temperatures.len()
        )));
    }
    if ground_truth.len() != clip_ids.len() || ground_truth.is_empty() {
        return Err(Error::Shape("need one id per ground-truth clip and at least one clip".into()));
    }
    let horizon = ground_truth[0].len();
    if ground_truth.iter().any(|c| c.len() != horizon) {
        return Err(Error::Shape("ground-truth clips differ in length".into()));
    }
    let mut scores = Vec::with_capacity(predictions.len());
    let mut summaries = Vec::with_capacity(predictions.len());
    for (pred, &temperature) in predictions.iter().zip(temperatures) {
        if pred.len() != ground_truth.len() {
            return Err(Error::Shape(format!(
                "{} predicted clips vs {} ground-truth clips",
                pred.len(),
                ground_truth.len()
            )));
        }
        let per_clip = try_map_indexed(pred.len(), exec, |c| {
            if pred[c].len() != horizon {
                return Err(Error::Shape(format!(
                    "clip {}: {} predicted frames, expected {horizon}",
                    clip_ids[c],
                    pred[c].len()
                )));
            }
            pred[c]
                .iter()
                .zip(&ground_truth[c])
                .enumerate()
                .map(|(time, (p, g))| {
                    Ok(FrameScore {
                        time,
                        psnr: psnr_frames(p, g)?,
                        ssim: ssim_frames(p, g)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let clip_mean = |f: fn(&FrameScore) -> f64| -> Vec<f64> {
            per_clip
                .iter()
                .map(|s| s.iter().map(f).sum::<f64>() / s.len().max(1) as f64)
                .collect()
        };
        let curve = |f: fn(&FrameScore) -> f64| -> Result<Vec<SubsetStats>> {
            (0..horizon)
                .map(|t| {
                    let v: Vec<f64> = per_clip.iter().map(|s| f(&s[t])).collect();
                    aggregate_subsets(&v, clip_ids, n_subsets)
                })
                .collect()
        };
        summaries.push(TemperatureSummary {
            temperature,
            psnr: aggregate_subsets(&clip_mean(|s| s.psnr), clip_ids, n_subsets)?,
            ssim: aggregate_subsets(&clip_mean(|s| s.ssim), clip_ids, n_subsets)?,
            psnr_curve: curve(|s| s.psnr)?,
            ssim_curve: curve(|s| s.ssim)?,
        });
        scores.push(per_clip);
    }
    let best_psnr = best_index(summaries.iter().map(|s| s.psnr.mean));
    let best_ssim = best_index(summaries.iter().map(|s| s.ssim.mean));
    Ok(EvalReport {
        clip_ids: clip_ids.to_vec(),
        scores,
        summaries,
        best_psnr,
        best_ssim,
    })
}

/// Clips in which some pair of objects comes closer (center to center)
/// than `fraction · image_size` at any frame.
pub fn collision_subset(tracks: &[ClipTracks], image_size: usize, fraction: f64) -> Vec<usize> {
    let threshold = fraction * image_size as f64;
    tracks
        .iter()
        .enumerate()
        .filter(|(_, clip)| {
            let frames = clip.points.iter().map(|p| p.frame).max().map_or(0, |m| m + 1);
            (0..frames).any(|t| {
                let pts: Vec<_> = clip.points.iter().filter(|p| p.frame == t).collect();
                pts.iter().enumerate().any(|(i, a)| {
                    pts[i + 1..]
                        .iter()
                        .any(|b| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() < threshold)
                })
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// One row per (temperature, clip, step).
pub fn scores_csv(report: &EvalReport) -> String {
    let mut out = String::from("temperature,clip,time,psnr,ssim\n");
    for (s, per_temp) in report.summaries.iter().zip(&report.scores) {
        for (clip, frames) in report.clip_ids.iter().zip(per_temp) {
            for f in frames {
                let _ = writeln!(out, "{},{},{},{:.6},{:.6}", s.temperature, clip, f.time, f.psnr, f.ssim);
            }
        }
    }
    out
}

/// One row per temperature with subset statistics of both metrics.
pub fn summary_csv(report: &EvalReport) -> String {
    let mut out = String::from("temperature,psnr_mean,psnr_std,ssim_mean,ssim_std,best_psnr,best_ssim\n");
    for (i, s) in report.summaries.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{},{}",
            s.temperature,
            s.psnr.mean,
            s.psnr.std,
            s.ssim.mean,
            s.ssim.std,
            i == report.best_psnr,
            i == report.best_ssim
        );
    }
    out
}

/// Per-step curves at the best temperature of each metric.
pub fn curve_csv(report: &EvalReport) -> String {
    let p = report.best_psnr_summary();
    let s = report.best_ssim_summary();
    let mut out = String::from("time,psnr_mean,psnr_std,ssim_mean,ssim_std\n");
    for (t, (a, b)) in p.psnr_curve.iter().zip(&s.ssim_curve).enumerate() {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", t, a.mean, a.std, b.mean, b.std);
    }
    out
}

/// A labelled mean curve with its ±std band.
pub struct CurveSeries<'a> {
    pub label: &'a str,
    pub points: &'a [SubsetStats],
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of mean curves with shaded ±std bands, as standalone SVG.
pub fn curves_svg(title: &str, y_label: &str, series: &[CurveSeries<'_>]) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let steps = series.iter().map(|s| s.points.len()).max().unwrap_or(0).max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for p in s.points {
            lo = lo.min(p.mean - p.std);
            hi = hi.max(p.mean + p.std);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let sx = |t: usize| m + (w - 2.0 * m) * t as f64 / (steps - 1) as f64;
    let sy = |v: f64| h - m - (h - 2.0 * m) * (v - lo) / (hi - lo);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, title);
    let _ = writeln!(
        out,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, m - 6.0, sy(v) + 4.0, v);
    }
    for t in 0..steps {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(t), h - m + 18.0, t + 1);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">predicted frame</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        y_label
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = s.points.iter().enumerate().map(|(t, p)| format!("{:.2},{:.2}", sx(t), sy(p.mean + p.std))).collect();
        let lower: Vec<String> = s.points.iter().enumerate().rev().map(|(t, p)| format!("{:.2},{:.2}", sx(t), sy(p.mean - p.std))).collect();
        let _ = writeln!(out, r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, upper.join(" "), lower.join(" "));
        let line: Vec<String> = s.points.iter().enumerate().map(|(t, p)| format!("{:.2},{:.2}", sx(t), sy(p.mean))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - m - 90.0,
            m + 16.0 * i as f64,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}
