//! Frame quality metrics and the evaluation protocol built on them:
//! per-step PSNR/SSIM, a temperature sweep with per-metric best selection,
//! and mean ± std over ten deterministic clip subsets.

mod quality;
mod report;

pub use quality::{
    frame_values, psnr, psnr_frames, ssim, ssim_frames, PSNR_CAP, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{
    aggregate_subsets, collision_subset, curve_csv, curves_svg, evaluate, scores_csv, summary_csv, CurveSeries,
    EvalReport, FrameScore, SubsetStats, TemperatureSummary,
};

/// Default sampling temperatures swept at evaluation time.
pub const DEFAULT_TEMPERATURES: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Number of clip subsets used for the mean ± std statistics.
pub const N_SUBSETS: usize = 10;

/// Default proximity threshold of the collision subset, as a fraction of
/// the image side.
pub const COLLISION_FRACTION: f64 = 0.25;
