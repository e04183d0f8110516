//! Comparison outputs: `report.md`, `report.csv`, per-variant score CSVs
//! and per-step curves with ±std bands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use ocvp::metrics::{self, CurveSeries, EvalReport};
use ocvp::predictor::Variant;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
const CSV_HEADER: &str =
    "subset,variant,n_clips,psnr_mean,psnr_std,psnr_temperature,ssim_mean,ssim_std,ssim_temperature,num_params";

/// Evaluation of one variant on one clip subset (`None` when the subset
/// has no clips).
#[derive(Clone, Debug)]
pub struct SubsetResult {
    pub name: String,
    pub n_clips: usize,
    pub report: Option<EvalReport>,
}

#[derive(Clone, Debug)]
pub struct VariantResult {
    pub variant: Variant,
    pub params: usize,
    pub subsets: Vec<SubsetResult>,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub config_hash: String,
    pub preset: String,
    pub resolution: usize,
    pub n_slots: usize,
    pub n_classes: usize,
    pub train_clips: usize,
    pub context_frames: usize,
    pub horizon: usize,
    pub temperatures: Vec<f64>,
    pub variants: Vec<VariantResult>,
    /// (stage name, parameter count, mean held-out reconstruction PSNR).
    pub autoencoders: Vec<(String, usize, f64)>,
}

/// One line of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub subset: String,
    pub variant: Variant,
    pub n_clips: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub psnr_temperature: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub ssim_temperature: f64,
    pub params: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn get(&self, subset: &str, variant: Variant) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.subset == subset && r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{:.6},{:.6},{},{}",
                r.subset,
                r.variant.as_str(),
                r.n_clips,
                r.psnr_mean,
                r.psnr_std,
                r.psnr_temperature,
                r.ssim_mean,
                r.ssim_std,
                r.ssim_temperature,
                r.params
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> anyhow::Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            bail!("unexpected report header");
        }
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 10 {
                    bail!("line {}: expected 10 fields", i + 2);
                }
                let num = |j: usize| f[j].parse::<f64>().with_context(|| format!("line {}, field {}", i + 2, j + 1));
                Ok(ReportRow {
                    subset: f[0].to_string(),
                    variant: f[1].parse().map_err(|e: String| anyhow::anyhow!("line {}: {e}", i + 2))?,
                    n_clips: f[2].parse()?,
                    psnr_mean: num(3)?,
                    psnr_std: num(4)?,
                    psnr_temperature: num(5)?,
                    ssim_mean: num(6)?,
                    ssim_std: num(7)?,
                    ssim_temperature: num(8)?,
                    params: f[9].parse()?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

impl CompareReport {
    /// Rows ordered subset-major, variants in report order.
    pub fn table(&self) -> ReportTable {
        let mut rows = Vec::new();
        let names: Vec<&str> = self
            .variants
            .first()
            .map(|v| v.subsets.iter().map(|s| s.name.as_str()).collect())
            .unwrap_or_default();
        for name in names {
            for v in &self.variants {
                let Some(s) = v.subsets.iter().find(|s| s.name == name) else { continue };
                let Some(r) = &s.report else { continue };
                let (p, q) = (r.best_psnr_summary(), r.best_ssim_summary());
                rows.push(ReportRow {
                    subset: name.to_string(),
                    variant: v.variant,
                    n_clips: s.n_clips,
                    psnr_mean: p.psnr.mean,
                    psnr_std: p.psnr.std,
                    psnr_temperature: p.temperature,
                    ssim_mean: q.ssim.mean,
                    ssim_std: q.ssim.std,
                    ssim_temperature: q.temperature,
                    params: v.params,
                });
            }
        }
        ReportTable { rows }
    }

    pub fn markdown(&self) -> String {
        let table = self.table();
        let mut md = String::from("# Controlled comparison\n\n");
        let temps: Vec<String> = self.temperatures.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(
            md,
            "Preset `{}` (N = {} slots, m = {} classes) at {r}×{r}, {} training clips. \
             Each model sees {} conditioning frames and predicts {}. \
             Temperatures swept: {}. Config hash `{}`.\n",
            self.preset,
            self.n_slots,
            self.n_classes,
            self.train_clips,
            self.context_frames,
            self.horizon,
            temps.join(", "),
            self.config_hash,
            r = self.resolution,
        );
        let subsets: Vec<(String, usize)> = self
            .variants
            .first()
            .map(|v| v.subsets.iter().map(|s| (s.name.clone(), s.n_clips)).collect())
            .unwrap_or_default();
        for (name, n) in subsets {
            let title = match name.as_str() {
                "full" => "Full test set".to_string(),
                "collision" => "Collision subset".to_string(),
                other => other.to_string(),
            };
            let _ = writeln!(md, "## {title} ({n} clips)\n");
            if n == 0 {
                md.push_str("No clips in this subset.\n\n");
                continue;
            }
            md.push_str("| Model | PSNR | SSIM | Num-Prms |\n|---|---|---|---|\n");
            for v in &self.variants {
                if let Some(r) = table.get(&name, v.variant) {
                    let _ = writeln!(
                        md,
                        "| {} | {:.2} ± {:.2} (τ = {}) | {:.4} ± {:.4} (τ = {}) | {} |",
                        v.variant.label(),
                        r.psnr_mean,
                        r.psnr_std,
                        r.psnr_temperature,
                        r.ssim_mean,
                        r.ssim_std,
                        r.ssim_temperature,
                        r.params
                    );
                }
            }
            md.push('\n');
        }
        md.push_str(
            "Mean ± std over the means of clip subsets (clip index mod subset count); \
             the temperature is chosen per metric over the whole subset.\n\n",
        );
        md.push_str("## Autoencoders\n\n| Autoencoder | Num-Prms | Held-out reconstruction PSNR |\n|---|---|---|\n");
        for (name, params, psnr) in &self.autoencoders {
            let label = if name == "oaae" { "object-aware (per-class encoders)" } else { "single encoder (SiS)" };
            let _ = writeln!(md, "| {label} | {params} | {psnr:.2} |");
        }
        md
    }
}

fn write(dir: &Path, rel: &str, text: &str, artifacts: &mut Vec<String>) -> anyhow::Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("{}", parent.display()))?;
    }
    fs::write(&path, text).with_context(|| format!("{}", path.display()))?;
    artifacts.push(rel.to_string());
    Ok(())
}

/// Writes every report file under `dir`; returns their relative paths.
pub fn write_all(dir: &Path, report: &CompareReport) -> anyhow::Result<Vec<String>> {
    let mut artifacts = Vec::new();
    for v in &report.variants {
        for s in &v.subsets {
            let Some(r) = &s.report else { continue };
            let stem = format!("{}_{}", s.name, v.variant.as_str());
            write(dir, &format!("eval/{stem}_scores.csv"), &metrics::scores_csv(r), &mut artifacts)?;
            write(dir, &format!("eval/{stem}_summary.csv"), &metrics::summary_csv(r), &mut artifacts)?;
            write(dir, &format!("curves/{stem}.csv"), &metrics::curve_csv(r), &mut artifacts)?;
        }
    }
    let names: Vec<String> = report
        .variants
        .first()
        .map(|v| v.subsets.iter().map(|s| s.name.clone()).collect())
        .unwrap_or_default();
    for name in names {
        let reports: Vec<(Variant, &EvalReport)> = report
            .variants
            .iter()
            .filter_map(|v| {
                let s = v.subsets.iter().find(|s| s.name == name)?;
                Some((v.variant, s.report.as_ref()?))
            })
            .collect();
        if reports.is_empty() {
            continue;
        }
        let psnr: Vec<CurveSeries<'_>> = reports
            .iter()
            .map(|(v, r)| CurveSeries { label: v.label(), points: &r.best_psnr_summary().psnr_curve })
            .collect();
        let ssim: Vec<CurveSeries<'_>> = reports
            .iter()
            .map(|(v, r)| CurveSeries { label: v.label(), points: &r.best_ssim_summary().ssim_curve })
            .collect();
        let svg = metrics::curves_svg(&format!("PSNR per predicted frame ({name})"), "PSNR (dB)", &psnr);
        write(dir, &format!("curves/{name}_psnr.svg"), &svg, &mut artifacts)?;
        let svg = metrics::curves_svg(&format!("SSIM per predicted frame ({name})"), "SSIM", &ssim);
        write(dir, &format!("curves/{name}_ssim.svg"), &svg, &mut artifacts)?;
    }
    write(dir, REPORT_MD, &report.markdown(), &mut artifacts)?;
    write(dir, REPORT_CSV, &report.table().to_csv(), &mut artifacts)?;
    Ok(artifacts)
}

pub fn read_report(path: &Path) -> anyhow::Result<ReportTable> {
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    ReportTable::parse_csv(&text).with_context(|| format!("{}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ocvp::synthdata::Frame;
    use ocvp::Execution;

    fn toy_report() -> CompareReport {
        let gt = vec![vec![Frame::filled(16, 16, [100, 100, 100]); 2]; 3];
        let variants = Variant::ALL
            .iter()
            .enumerate()
            .map(|(i, &variant)| {
                let preds: Vec<Vec<Vec<Frame>>> = [10u8, 20]
                    .iter()
                    .map(|&d| vec![vec![Frame::filled(16, 16, [100 + d + i as u8; 3]); 2]; 3])
                    .collect();
                let r = metrics::evaluate(&preds, &gt, &[0, 1, 2], &[0.5, 1.0], 10, Execution::Sequential).unwrap();
                VariantResult {
                    variant,
                    params: 1000 * (i + 1),
                    subsets: vec![
                        SubsetResult { name: "full".into(), n_clips: 3, report: Some(r) },
                        SubsetResult { name: "collision".into(), n_clips: 0, report: None },
                    ],
                }
            })
            .collect();
        CompareReport {
            config_hash: "abc".into(),
            preset: "bounce2".into(),
            resolution: 16,
            n_slots: 3,
            n_classes: 2,
            train_clips: 7,
            context_frames: 5,
            horizon: 2,
            temperatures: vec![0.5, 1.0],
            variants,
            autoencoders: vec![("oaae".into(), 10, 30.0), ("oaae-sis".into(), 20, 28.0)],
        }
    }

    #[test]
    fn table_has_one_row_per_variant_and_nonempty_subset() {
        let r = toy_report();
        let t = r.table();
        assert_eq!(t.rows.len(), 3);
        let sis = t.get("full", Variant::Sis).unwrap();
        assert_eq!(sis.params, 1000);
        assert_eq!(sis.psnr_temperature, 0.5);
        assert!(t.get("collision", Variant::Scat).is_none());
    }

    #[test]
    fn csv_round_trips() {
        let t = toy_report().table();
        let back = ReportTable::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(back.rows.len(), t.rows.len());
        for (a, b) in back.rows.iter().zip(&t.rows) {
            assert_eq!(a.variant, b.variant);
            assert!((a.psnr_mean - b.psnr_mean).abs() < 1e-6);
        }
        assert!(ReportTable::parse_csv("bad header\n").is_err());
    }

    #[test]
    fn markdown_mirrors_table_layout() {
        let md = toy_report().markdown();
        assert!(md.contains("| Model | PSNR | SSIM | Num-Prms |"));
        for label in ["SiS", "SNCAT", "SCAT"] {
            assert!(md.contains(&format!("| {label} |")), "{label}");
        }
        assert!(md.contains("No clips in this subset."));
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_all(dir.path(), &toy_report()).unwrap();
        for f in ["report.md", "report.csv", "curves/full_psnr.svg", "curves/full_scat.csv", "eval/full_sis_scores.csv"] {
            assert!(files.iter().any(|x| x == f), "{f}");
            assert!(dir.path().join(f).exists());
        }
        assert!(!files.iter().any(|f| f.starts_with("curves/collision")));
        let back = read_report(&dir.path().join(REPORT_CSV)).unwrap();
        assert_eq!(back.rows.len(), 3);
    }
}
