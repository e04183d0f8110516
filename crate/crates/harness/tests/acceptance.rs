//! Acceptance criteria 1–9. Prints one `PASS`/`FAIL` line per criterion and
//! fails if any blocking criterion fails. Criterion 7 is a soft statistical
//! check and only reports.
//!
//! The training criteria run the real binary on desk budgets pinned below;
//! their run directories stay under the cargo target directory for
//! inspection (`acceptance/`).
//!
//! Built with `harness = false` so the criterion lines are always printed,
//! not only when something fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use candle_core::{Device, Tensor};
use ocvp::decompose::{decompose_frame, recompose};
use ocvp::metrics::{self, DEFAULT_TEMPERATURES, N_SUBSETS};
use ocvp::nn::{gradient_check, to_f64_vec, StopGrad};
use ocvp::oaae::{quantize_st, Codebook, FrameBatch, Oaae, OaaeConfig};
use ocvp::predictor::{build_variant, next_frame_loss, stack_tokens, Predictor, PredictorConfig, Variant};
use ocvp::synthdata::{preset, simulate_clip, Frame, PanopticMask, PresetName, SceneSchema};
use ocvp::{DType, Execution};
use ocvp_harness::ledger::{RunLedger, StageStatus};
use ocvp_harness::pipeline::parameter_table;
use ocvp_harness::report::read_report;
use ocvp_harness::ExperimentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- pinned tolerances and budgets ------------------------------------------

const C1_FRAMES: usize = 100;
const C1_LIMIT: Duration = Duration::from_secs(10);

const C2_PAIRS: usize = 1000;
const C2_LIMIT: Duration = Duration::from_secs(10);

const C3_MAX_PARAMS: usize = 5000;
const C3_SAMPLES: usize = 200;
const C3_REL_TOL: f64 = 1e-4;
const C3_ROUTE_TOL: f64 = 1e-10;
const C3_FD_STEP: f64 = 1e-5;
const C3_REL_FLOOR: f64 = 1e-8;
const C3_LIMIT: Duration = Duration::from_secs(120);

const C4_CAUSAL_TOL: f64 = 1e-6;
const C4_INDEPENDENT_TOL: f64 = 1e-7;
const C4_INTERACT_MIN: f64 = 1e-3;
const C4_LIMIT: Duration = Duration::from_secs(60);

/// Reference capacity-matching example: five instances of width 128 give a
/// monolithic width of 640.
const C5_INSTANCE_DIM: usize = 128;
const C5_SIS_DIM: usize = 640;

/// Held-out reconstruction PSNR floor. The first verified run of exactly this
/// configuration (seed 0) reached 29.22 dB in 21 min on one CPU core; the
/// floor leaves ~1.2 dB for floating-point drift across platforms.
const C6_PSNR_BASELINE: f64 = 28.0;
const C6_LIMIT: Duration = Duration::from_secs(30 * 60);
const C6_SETTINGS: &[&str] = &[
    "data.n_clips=550",
    "data.test_clips=50",
    "oaae_optim.batch_size=8",
    "oaae_optim.steps=1000",
];

const C7_SEEDS: [u64; 3] = [0, 1, 2];
const C7_REQUIRED_WINS: usize = 2;
/// Matched desk budget for the three predictors (and both autoencoders).
const C7_SETTINGS: &[&str] = &[
    "data.n_clips=200",
    "data.test_clips=20",
    "oaae_optim.batch_size=8",
    "oaae_optim.steps=300",
    "predictor_optim.steps=300",
];

const C8_CONTEXT: usize = 5;
const C8_ORACLE_TOL: f64 = 1e-9;

// ---- reporting --------------------------------------------------------------

struct Outcome {
    id: u32,
    pass: bool,
    blocking: bool,
}

fn verdict(id: u32, name: &str, pass: bool, blocking: bool, detail: String) -> Outcome {
    let tag = match (pass, blocking) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (non-blocking)",
    };
    println!("criterion {id} {tag} [{name}] {detail}");
    Outcome { id, pass, blocking }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---- criterion 1: instance decomposition round trip ------------------------------

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut frames = 0;
    let mut mismatches = 0;
    'outer: for name in PresetName::ALL {
        let spec = preset(name, 32).spec(4, 11);
        for clip_index in 0..spec.n_clips {
            let (clip, _) = simulate_clip(&spec, clip_index).unwrap();
            for (frame, mask) in clip.frames.iter().zip(&clip.masks) {
                let parts = decompose_frame(frame, mask, &spec.schema).unwrap();
                if recompose(&parts).unwrap() != *frame {
                    mismatches += 1;
                }
                frames += 1;
                if frames == C1_FRAMES {
                    break 'outer;
                }
            }
        }
    }
    let took = t0.elapsed();
    verdict(
        1,
        "decompose/recompose round trip",
        frames == C1_FRAMES && mismatches == 0 && took < C1_LIMIT,
        true,
        format!("{frames} frames, {mismatches} mismatches, {:.2}s (limit {}s)", took.as_secs_f64(), C1_LIMIT.as_secs()),
    )
}

// ---- criterion 2: quantizer vs exhaustive search ---------------------------------

/// Exhaustive nearest row in exact integer arithmetic; ties to the lowest index.
fn oracle_nearest(feature: &[i64], codebook: &[i64], dim: usize) -> u32 {
    let dists = codebook
        .chunks_exact(dim)
        .map(|e| feature.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<i64>());
    dists.enumerate().min_by_key(|&(j, d)| (d, j)).unwrap().0 as u32
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut agree, mut total, mut ties) = (0, 0, 0);
    for pair in 0..C2_PAIRS {
        let dim = rng.random_range(1..=8);
        let k = rng.random_range(1..=32);
        let (h, w) = (rng.random_range(1..=3), rng.random_range(1..=3));
        // Small integers make squared distances exact and ties frequent.
        let span = if pair % 2 == 0 { 2 } else { 50 };
        let mut codebook: Vec<i64> = (0..k * dim).map(|_| rng.random_range(-span..=span)).collect();
        if k > 1 && pair % 3 == 0 {
            // Duplicate a row so exact ties are guaranteed to appear.
            let (a, b) = (rng.random_range(0..k), rng.random_range(0..k));
            let row: Vec<i64> = codebook[a * dim..(a + 1) * dim].to_vec();
            codebook[b * dim..(b + 1) * dim].copy_from_slice(&row);
        }
        let features: Vec<i64> = (0..h * w * dim).map(|_| rng.random_range(-span..=span)).collect();
        let expect: Vec<u32> = features.chunks_exact(dim).map(|f| oracle_nearest(f, &codebook, dim)).collect();
        for f in features.chunks_exact(dim) {
            let best = oracle_nearest(f, &codebook, dim) as usize;
            let d = |j: usize| -> i64 { f.iter().zip(&codebook[j * dim..]).map(|(a, b)| (a - b) * (a - b)).sum() };
            ties += ((0..k).filter(|&j| d(j) == d(best)).count() > 1) as usize;
        }

        let cb = Codebook { class_id: 1, dim, vectors: codebook.iter().map(|&v| v as f64).collect() };
        let fv: Vec<f64> = features.iter().map(|&v| v as f64).collect();
        let grid = cb.quantize(&fv, h, w, 0).unwrap();
        // The tensor path used inside the autoencoder: (1, d, h, w) layout.
        let mut chw = vec![0.0; h * w * dim];
        for p in 0..h * w {
            for c in 0..dim {
                chw[c * h * w + p] = fv[p * dim + c];
            }
        }
        let z = Tensor::from_vec(chw, (1, dim, h, w), &Device::Cpu).unwrap();
        let cbt = Tensor::from_vec(cb.vectors.clone(), (k, dim), &Device::Cpu).unwrap();
        let st = quantize_st(&z, &cbt, &mut StopGrad::live()).unwrap();
        for ((e, a), b) in expect.iter().zip(&grid.indices).zip(&st.indices) {
            total += 1;
            agree += (e == a && e == b) as usize;
        }
    }
    let took = t0.elapsed();
    verdict(
        2,
        "quantizer vs exhaustive nearest neighbour",
        agree == total && took < C2_LIMIT,
        true,
        format!(
            "{C2_PAIRS} codebooks, {agree}/{total} indices agree ({ties} tied lookups), {:.2}s (limit {}s)",
            took.as_secs_f64(),
            C2_LIMIT.as_secs()
        ),
    )
}

// ---- criterion 3: gradient checks ------------------------------------------------

fn random_batch(b: usize, side: usize, n_slots: usize, seed: u64) -> FrameBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut masks = Vec::new();
    for _ in 0..b {
        let mut f = Frame::zeros(side, side);
        f.data.iter_mut().for_each(|v| *v = rng.random());
        let mut m = PanopticMask::filled(side, side, 0);
        m.ids.iter_mut().for_each(|v| *v = rng.random_range(0..n_slots as u8));
        frames.push(f);
        masks.push(m);
    }
    let fr: Vec<&Frame> = frames.iter().collect();
    let mr: Vec<&PanopticMask> = masks.iter().collect();
    FrameBatch::new(&fr, &mr, n_slots, DType::F64).unwrap()
}

fn toy_oaae() -> OaaeConfig {
    OaaeConfig {
        embed_dim: 4,
        codebook_size: 8,
        hidden_dims: vec![4],
        n_residual_layers: 1,
        downsample_factor: 2,
        alpha: 0.7,
        beta: 0.25,
        decomposed: true,
    }
}

fn toy_predictor() -> PredictorConfig {
    PredictorConfig {
        model_dim: 8,
        n_heads: 2,
        depth: 2,
        ff_expansion: 2,
        dropout: 0.0,
        context_frames: 3,
        horizon: 2,
        noise_std: 0.0,
    }
}

/// bg + 2 balls over a 2x2 token grid with 6 codes.
fn toy_model(variant: Variant, cfg: &PredictorConfig, seed: u64) -> Predictor {
    let schema = SceneSchema::single_class("ball", 2);
    let ae = OaaeConfig { codebook_size: 6, downsample_factor: 4, ..toy_oaae() };
    build_variant(variant, &schema, &ae, cfg, 8, 8, DType::F64, seed).unwrap()
}

/// Random token streams `[slot][t * cells]` for one clip.
fn random_streams(n_slots: usize, frames: usize, cells: usize, k: u32, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_slots).map(|_| (0..frames * cells).map(|_| rng.random_range(0..k)).collect()).collect()
}

fn tensors(streams: &[Vec<u32>], frames: usize, cells: usize) -> Vec<Tensor> {
    stack_tokens(&[streams], frames, cells).unwrap()
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let schema = SceneSchema::single_class("ball", 1);
    let ae = Oaae::new(&toy_oaae(), &schema, DType::F64, 11).unwrap();
    let batch = random_batch(2, 8, 2, 4);
    let a = gradient_check(ae.store(), C3_SAMPLES, 0, C3_FD_STEP, C3_REL_FLOOR, |sg| Ok(ae.forward(&batch, sg)?.total)).unwrap();

    let cfg = PredictorConfig { depth: 1, ..toy_predictor() };
    let pred = toy_model(Variant::Scat, &cfg, 9);
    let cells = pred.shape().n_cells();
    let x = tensors(&random_streams(3, 3, cells, 6, 10), 3, cells);
    let y = tensors(&random_streams(3, 3, cells, 6, 11), 3, cells);
    let b = gradient_check(pred.store(), C3_SAMPLES, 1, C3_FD_STEP, C3_REL_FLOOR, |_| next_frame_loss(&pred, &x, &y, None)).unwrap();

    let out = ae.forward(&batch, &mut StopGrad::live()).unwrap();
    let max_grad = |loss: &Tensor, prefix: &str| -> f64 {
        let grads = loss.backward().unwrap();
        ae.store()
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .filter_map(|(_, v)| grads.get(v.as_tensor()).map(|g| to_f64_vec(g).unwrap()))
            .flatten()
            .fold(0.0, |m: f64, g| m.max(g.abs()))
    };
    let vq_to_encoder = max_grad(&out.terms.vq, "enc");
    let commit_to_codebook = max_grad(&out.terms.commit, "codebook");
    let took = t0.elapsed();
    let sizes_ok = ae.param_count() <= C3_MAX_PARAMS && pred.param_count() <= C3_MAX_PARAMS;
    verdict(
        3,
        "gradient checks (f64)",
        sizes_ok
            && a.checked == C3_SAMPLES
            && b.checked == C3_SAMPLES
            && a.max_rel_error < C3_REL_TOL
            && b.max_rel_error < C3_REL_TOL
            && vq_to_encoder <= C3_ROUTE_TOL
            && commit_to_codebook <= C3_ROUTE_TOL
            && took < C3_LIMIT,
        true,
        format!(
            "oaae {} params max rel err {:.2e}; predictor {} params max rel err {:.2e} (tol {C3_REL_TOL:.0e}); \
             |d loss_vq/d enc| {vq_to_encoder:.1e}, |d loss_commit/d codebook| {commit_to_codebook:.1e} (tol {C3_ROUTE_TOL:.0e}); {:.1}s",
            ae.param_count(),
            a.max_rel_error,
            pred.param_count(),
            b.max_rel_error,
            took.as_secs_f64()
        ),
    )
}

// ---- criterion 4: causality and slot-independence probes -------------------------

fn logits(model: &Predictor, streams: &[Vec<u32>], frames: usize) -> Vec<Vec<f64>> {
    let cells = model.shape().n_cells();
    model
        .forward(&tensors(streams, frames, cells), None)
        .unwrap()
        .iter()
        .map(|t| to_f64_vec(t).unwrap())
        .collect()
}

/// Changes every token of `slot` at times `from..`.
fn perturbed(streams: &[Vec<u32>], slot: usize, from: usize, cells: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = streams.to_vec();
    for tok in &mut out[slot][from * cells..] {
        *tok = (*tok + 1) % k;
    }
    out
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let frames = 6;
    let k = 6;
    let mut future_leak: f64 = 0.0;
    for v in Variant::ALL {
        let m = toy_model(v, &toy_predictor(), 2);
        let cells = m.shape().n_cells();
        let streams = random_streams(m.shape().n_slots(), frames, cells, k, 3);
        let base = logits(&m, &streams, frames);
        for t in 1..frames {
            for slot in 0..m.shape().n_slots() {
                let pert = logits(&m, &perturbed(&streams, slot, t, cells, k), frames);
                let cut = t * cells * k as usize;
                for (a, b) in base.iter().zip(&pert) {
                    future_leak = future_leak.max(max_abs_diff(&a[..cut], &b[..cut]));
                }
            }
        }
    }
    let cross = |v: Variant| -> f64 {
        let m = toy_model(v, &toy_predictor(), 4);
        let cells = m.shape().n_cells();
        let streams = random_streams(3, 4, cells, k, 5);
        let base = logits(&m, &streams, 4);
        let pert = logits(&m, &perturbed(&streams, 1, 0, cells, k), 4);
        max_abs_diff(&base[0], &pert[0]).max(max_abs_diff(&base[2], &pert[2]))
    };
    let sncat = cross(Variant::Sncat);
    let scat = cross(Variant::Scat);
    let took = t0.elapsed();
    verdict(
        4,
        "causality and slot-independence probes",
        future_leak <= C4_CAUSAL_TOL && sncat <= C4_INDEPENDENT_TOL && scat > C4_INTERACT_MIN && took < C4_LIMIT,
        true,
        format!(
            "future->past {future_leak:.1e} (tol {C4_CAUSAL_TOL:.0e}, all variants); SNCAT cross-slot {sncat:.1e} \
             (tol {C4_INDEPENDENT_TOL:.0e}); SCAT cross-slot {scat:.2e} (min {C4_INTERACT_MIN:.0e}); {:.1}s",
            took.as_secs_f64()
        ),
    )
}

// ---- criterion 5: capacity matching ------------------------------------------------

fn criterion_5() -> Outcome {
    let mut overrides = ocvp::kv::KvMap::new();
    overrides.insert("preset", "bounce-real-ish");
    overrides.insert("predictor.model_dim", C5_INSTANCE_DIM);
    let cfg = ExperimentConfig::resolve(&overrides).unwrap();
    let schema = cfg.dataset_spec().schema;
    let table = parameter_table(&cfg).unwrap();
    println!("  component            embed_dim   num_params");
    for v in [Variant::Sncat, Variant::Sis] {
        let ae_cfg = cfg.oaae_for(v);
        let ae = Oaae::new(&ae_cfg, &schema, DType::F32, 0).unwrap();
        let name = if v.decomposed() { "oaae" } else { "oaae-sis" };
        println!("  {name:<20} {:>9} {:>12}", ae_cfg.encoder_embed_dim(&schema), ae.param_count());
    }
    for (v, dim, params) in &table {
        println!("  predictor-{:<10} {dim:>9} {params:>12}", v.as_str());
    }
    let get = |v: Variant| table.iter().find(|r| r.0 == v).copied().unwrap();
    let (_, sis_dim, sis) = get(Variant::Sis);
    let (_, scat_dim, scat) = get(Variant::Scat);
    let n = schema.n_slots();
    verdict(
        5,
        "capacity matching (bounce-real-ish)",
        n == 5 && sis_dim == n * scat_dim && sis_dim == C5_SIS_DIM && sis > scat,
        true,
        format!("N={n}: SiS width {sis_dim} = {n} x {scat_dim} (expected {C5_SIS_DIM}); SiS {sis} params > SCAT {scat} params"),
    )
}

// ---- training runs ------------------------------------------------------------------

fn acceptance_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    dir
}

fn ocvp(dir: &Path, settings: &[&str], args: &[&str]) -> Result<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ocvp"));
    cmd.arg("--out").arg(dir).arg("--quiet");
    for s in settings {
        cmd.args(["--set", s]);
    }
    let o = cmd.args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&o.stderr).trim().to_string())
    }
}

fn criterion_6() -> Outcome {
    let name = "desk-scale OAAE training (bounce2, 32x32)";
    let dir = acceptance_dir("c6");
    let t0 = Instant::now();
    let args = ["compare", "--preset", "bounce2", "--seed", "0", "--stop-after", "oaae"];
    if let Err(e) = ocvp(&dir, C6_SETTINGS, &args) {
        return verdict(6, name, false, true, format!("run failed: {e}"));
    }
    let took = t0.elapsed();
    let ledger = RunLedger::load(&dir).unwrap();
    let entry = ledger
        .entries
        .iter()
        .rev()
        .find(|e| e.stage == "oaae" && e.status == StageStatus::Completed)
        .expect("oaae completed");
    let psnr = entry.metrics["heldout_psnr"];
    let (l0, l1) = (entry.metrics["probe_loss_initial"], entry.metrics["probe_loss_final"]);
    let train_clips = ocvp::synthdata::Dataset::open(&dir.join("data")).unwrap().n_clips() - 50;
    verdict(
        6,
        name,
        psnr >= C6_PSNR_BASELINE && l1 < 0.5 * l0 && took <= C6_LIMIT && train_clips == 500,
        true,
        format!(
            "{train_clips} training clips; held-out PSNR {psnr:.2} dB (baseline {C6_PSNR_BASELINE} dB); \
             loss {l0:.4} -> {l1:.4} (ratio {:.3}, need < 0.5); {:.1} min (limit {})",
            l1 / l0,
            took.as_secs_f64() / 60.0,
            C6_LIMIT.as_secs() / 60
        ),
    )
}

struct CompareRun {
    seed: u64,
    dir: PathBuf,
}

fn compare_runs() -> Result<Vec<CompareRun>, String> {
    C7_SEEDS
        .iter()
        .map(|&seed| {
            let dir = acceptance_dir(&format!("c7-seed{seed}"));
            let s = seed.to_string();
            ocvp(&dir, C7_SETTINGS, &["compare", "--preset", "bounce2", "--seed", &s, "--sequential"])?;
            Ok(CompareRun { seed, dir })
        })
        .collect()
}

fn criterion_7(runs: &Result<Vec<CompareRun>, String>) -> Outcome {
    let name = "SCAT >= SNCAT on the collision subset (bounce2, 3 seeds)";
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return verdict(7, name, false, false, format!("compare failed: {e}")),
    };
    let mut wins = 0;
    let mut parts = Vec::new();
    for run in runs {
        let table = read_report(&run.dir.join("report.csv")).unwrap();
        let (Some(scat), Some(sncat)) = (table.get("collision", Variant::Scat), table.get("collision", Variant::Sncat)) else {
            parts.push(format!("seed {}: empty collision subset", run.seed));
            continue;
        };
        let (a, b) = (scat.psnr_mean, sncat.psnr_mean);
        wins += (a >= b) as usize;
        parts.push(format!("seed {}: SCAT {a:.2} vs SNCAT {b:.2} dB over {} clips", run.seed, scat.n_clips));
    }
    let curves = runs.iter().all(|r| r.dir.join("curves/collision_psnr.svg").exists());
    verdict(
        7,
        name,
        wins >= C7_REQUIRED_WINS && curves,
        false,
        format!("{wins}/{} seeds (need {C7_REQUIRED_WINS}); {}; curves in {}", runs.len(), parts.join("; "), runs[0].dir.parent().unwrap().display()),
    )
}

// ---- criterion 8: evaluation protocol ----------------------------------------------------

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig::resolve(&ocvp::kv::KvMap::new()).unwrap();
    let grid_ok = cfg.eval.temperatures == DEFAULT_TEMPERATURES.to_vec()
        && DEFAULT_TEMPERATURES.len() == 10
        && cfg.eval.n_subsets == N_SUBSETS
        && N_SUBSETS == 10
        && cfg.predictor.context_frames == C8_CONTEXT;

    // Arithmetic oracle: 20 clips, ground truth black, prediction a uniform
    // grey k_i/255 so PSNR_i = 20 log10(255 / k_i).
    let n = 20;
    let (h, horizon) = (16, 2);
    let gt: Vec<Vec<Frame>> = (0..n).map(|_| vec![Frame::zeros(h, h); horizon]).collect();
    let level = |i: usize| (i + 1) as u8 * 3;
    let preds: Vec<Vec<Vec<Frame>>> = DEFAULT_TEMPERATURES
        .iter()
        .enumerate()
        .map(|(j, _)| {
            (0..n)
                .map(|i| {
                    // The middle temperature is the best one for every clip.
                    let k = if j == 4 { level(i) } else { level(i) + 1 };
                    vec![Frame::filled(h, h, [k; 3]); horizon]
                })
                .collect()
        })
        .collect();
    let ids: Vec<usize> = (0..n).collect();
    let report = metrics::evaluate(&preds, &gt, &ids, &DEFAULT_TEMPERATURES, N_SUBSETS, Execution::Sequential).unwrap();

    let psnr_i: Vec<f64> = (0..n).map(|i| 20.0 * (255.0 / level(i) as f64).log10()).collect();
    let subset_means: Vec<f64> = (0..N_SUBSETS).map(|s| (psnr_i[s] + psnr_i[s + N_SUBSETS]) / 2.0).collect();
    let mean = subset_means.iter().sum::<f64>() / N_SUBSETS as f64;
    let std = (subset_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / N_SUBSETS as f64).sqrt();
    let best = report.best_psnr_summary();
    let oracle_ok = report.summaries.len() == 10
        && best.temperature == DEFAULT_TEMPERATURES[4]
        && (best.psnr.mean - mean).abs() < C8_ORACLE_TOL
        && (best.psnr.std - std).abs() < C8_ORACLE_TOL
        && best
            .psnr
            .subset_means
            .iter()
            .zip(&subset_means)
            .all(|(a, b)| (a - b).abs() < C8_ORACLE_TOL)
        && best.psnr_curve.len() == horizon;
    verdict(
        8,
        "evaluation protocol",
        grid_ok && oracle_ok,
        true,
        format!(
            "context {} frames, {} temperatures {:?}, {} subsets; oracle mean {mean:.6} std {std:.6} vs report {:.6} +- {:.6} at T={}",
            cfg.predictor.context_frames,
            cfg.eval.temperatures.len(),
            cfg.eval.temperatures,
            cfg.eval.n_subsets,
            best.psnr.mean,
            best.psnr.std,
            best.temperature
        ),
    )
}

// ---- criterion 9: determinism --------------------------------------------------------------

fn criterion_9(runs: &Result<Vec<CompareRun>, String>) -> Outcome {
    let name = "compare --seed 0 twice, single-threaded";
    let first = match runs {
        Ok(r) => r.iter().find(|r| r.seed == 0).unwrap().dir.clone(),
        Err(e) => return verdict(9, name, false, true, format!("first run failed: {e}")),
    };
    let dir = acceptance_dir("c9-seed0-repeat");
    if let Err(e) = ocvp(&dir, C7_SETTINGS, &["compare", "--preset", "bounce2", "--seed", "0", "--sequential"]) {
        return verdict(9, name, false, true, format!("second run failed: {e}"));
    }
    let a = fs::read(first.join("report.csv")).unwrap();
    let b = fs::read(dir.join("report.csv")).unwrap();
    let same_csvs = ["eval/full_scat_scores.csv", "eval/collision_sncat_summary.csv", "curves/full_sis.csv"]
        .iter()
        .all(|f| fs::read(first.join(f)).ok() == fs::read(dir.join(f)).ok());
    verdict(
        9,
        name,
        a == b && same_csvs,
        true,
        format!("report.csv {} bytes, byte-identical: {}; per-clip CSVs identical: {same_csvs}", a.len(), a == b),
    )
}

fn main() {
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    outcomes.push(criterion_6());
    let runs = compare_runs();
    outcomes.push(criterion_7(&runs));
    outcomes.push(criterion_8());
    outcomes.push(criterion_9(&runs));

    let failed: Vec<u32> = outcomes.iter().filter(|o| o.blocking && !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "blocking criteria failed: {failed:?}");
}
