//! The staged experiment: generate → autoencoders → predictors → evaluate.
//!
//! Every stage has a hash over exactly the inputs that determine its
//! output. Artifacts are stamped with that hash and recorded in the run
//! ledger, so an interrupted run resumes where it stopped and produces the
//! same outputs as an uninterrupted one.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use ocvp::checkpoint::Checkpoint;
use ocvp::exec::try_map_indexed;
use ocvp::kv::{sha256_hex, KvMap};
use ocvp::metrics;
use ocvp::oaae::{tensor_to_frames, train_oaae, FrameBatch, FramePool, Oaae};
use ocvp::predictor::{
    build_variant, sample_autoregressive, tokenize_clip, train_predictor, Predictor, SamplerConfig, Variant,
};
use ocvp::synthdata::{clip_file_name, generate_dataset, Clip, Dataset, Frame, PanopticMask};
use ocvp::{DType, Execution};

use crate::config::ExperimentConfig;
use crate::ledger::{LedgerEntry, RunLedger, StageStatus};
use crate::report::{self, CompareReport, ReportTable, SubsetResult, VariantResult};

const DTYPE: DType = DType::F32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Oaae,
    OaaeSis,
    Predictor(Variant),
    Evaluate,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::Generate,
        Stage::Oaae,
        Stage::OaaeSis,
        Stage::Predictor(Variant::Sis),
        Stage::Predictor(Variant::Sncat),
        Stage::Predictor(Variant::Scat),
        Stage::Evaluate,
    ];

    /// The autoencoder stage a predictor variant depends on.
    pub fn autoencoder_for(variant: Variant) -> Stage {
        if variant.decomposed() {
            Stage::Oaae
        } else {
            Stage::OaaeSis
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Generate => f.write_str("generate"),
            Stage::Oaae => f.write_str("oaae"),
            Stage::OaaeSis => f.write_str("oaae-sis"),
            Stage::Predictor(v) => write!(f, "predictor-{}", v.as_str()),
            Stage::Evaluate => f.write_str("evaluate"),
        }
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ORDER
            .into_iter()
            .find(|st| st.to_string() == s)
            .ok_or_else(|| {
                let names: Vec<String> = Stage::ORDER.iter().map(|s| s.to_string()).collect();
                format!("unknown stage `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Options that do not change any result.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub force: bool,
    pub exec: Execution,
    pub stop_after: Option<Stage>,
    /// Progress lines go to stderr unless quiet.
    pub quiet: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            force: false,
            exec: Execution::default(),
            stop_after: None,
            quiet: false,
        }
    }
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub dir: PathBuf,
    pub opts: RunOptions,
    ledger: RunLedger,
}

/// Whether a pipeline call ran to the end or honored `--stop-after`.
#[derive(Debug)]
pub enum Flow<T> {
    Done(T),
    Stopped(Stage),
}

impl Run {
    pub fn open(cfg: ExperimentConfig, dir: &Path, opts: RunOptions) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
        let ledger = RunLedger::load(dir)?;
        Ok(Self {
            cfg,
            dir: dir.to_path_buf(),
            opts,
            ledger,
        })
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.opts.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    // ---- stage hashes -------------------------------------------------

    pub fn stage_hash(&self, stage: Stage) -> String {
        let c = &self.cfg;
        let mut kv = KvMap::new();
        kv.insert("stage", stage);
        match stage {
            Stage::Generate => return c.dataset_spec().config_hash(),
            Stage::Oaae | Stage::OaaeSis => {
                let variant = if stage == Stage::Oaae { Variant::Scat } else { Variant::Sis };
                kv.insert("data", self.stage_hash(Stage::Generate));
                kv.insert("train_clips", c.train_range().len());
                kv.insert("seed", c.seed);
                kv.extend(&c.oaae_for(variant).to_kv().with_prefix("oaae."));
                kv.extend(&c.oaae_optim.to_kv().with_prefix("optim."));
            }
            Stage::Predictor(v) => {
                kv.insert("autoencoder", self.stage_hash(Stage::autoencoder_for(v)));
                kv.insert("seed", c.seed);
                kv.extend(&c.predictor.to_kv().with_prefix("predictor."));
                kv.extend(&c.predictor_optim.to_kv().with_prefix("optim."));
            }
            Stage::Evaluate => {
                for v in Variant::ALL {
                    kv.insert(format!("predictor.{}", v.as_str()), self.stage_hash(Stage::Predictor(v)));
                }
                kv.insert("test_clips", format!("{:?}", c.test_range()));
                kv.insert("temperatures", ocvp::kv::format_list(&c.eval.temperatures));
                kv.insert("n_subsets", c.eval.n_subsets);
                kv.insert("collision_fraction", c.eval.collision_fraction);
            }
        }
        kv.hash()
    }

    fn checkpoint_rel(stage: Stage) -> String {
        format!("checkpoints/{stage}.ckpt")
    }

    fn record(&mut self, stage: Stage, status: StageStatus, artifacts: Vec<String>, secs: f64, params: &[(String, usize)]) -> anyhow::Result<()> {
        self.record_with_metrics(stage, status, artifacts, secs, params, &[])
    }

    fn record_with_metrics(
        &mut self,
        stage: Stage,
        status: StageStatus,
        artifacts: Vec<String>,
        secs: f64,
        params: &[(String, usize)],
        metrics: &[(&str, f64)],
    ) -> anyhow::Result<()> {
        let entry = LedgerEntry {
            stage: stage.to_string(),
            status,
            config_hash: self.stage_hash(stage),
            artifacts,
            wall_clock_s: secs,
            parameter_counts: params.iter().cloned().collect(),
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        self.ledger.append(&self.dir, entry)
    }

    fn is_done(&self, stage: Stage) -> bool {
        !self.opts.force && self.ledger.completed(&self.dir, &stage.to_string(), &self.stage_hash(stage)).is_some()
    }

    // ---- data ---------------------------------------------------------

    pub fn data_dir(&self) -> PathBuf {
        self.dir.join("data")
    }

    /// Generates the dataset unless a hash-matched copy is recorded.
    pub fn ensure_dataset(&mut self) -> anyhow::Result<Dataset> {
        let stage = Stage::Generate;
        if self.is_done(stage) {
            if let Ok(ds) = Dataset::open(&self.data_dir()) {
                if ds.config_hash == self.stage_hash(stage) {
                    self.log(format!("[{stage}] up to date, skipping"));
                    return Ok(ds);
                }
            }
        }
        self.record(stage, StageStatus::Started, vec![], 0.0, &[])?;
        let t0 = Instant::now();
        let spec = self.cfg.dataset_spec();
        self.log(format!("[{stage}] {} clips of {} frames into {}", spec.n_clips, spec.clip_spec.n_frames, self.data_dir().display()));
        let ds = generate_dataset(&spec, &self.data_dir(), self.opts.exec)?;
        let mut artifacts = vec![format!("data/{}", ocvp::synthdata::MANIFEST_FILE)];
        artifacts.push(format!("data/{}", clip_file_name(spec.n_clips - 1)));
        self.record(stage, StageStatus::Completed, artifacts, t0.elapsed().as_secs_f64(), &[])?;
        Ok(ds)
    }

    /// Opens the dataset without generating it.
    pub fn require_dataset(&self) -> anyhow::Result<Dataset> {
        let ds = Dataset::open(&self.data_dir())?;
        let expected = self.stage_hash(Stage::Generate);
        if ds.config_hash != expected && !self.opts.force {
            bail!(
                "{}: dataset hash {} does not match the configuration ({expected}); regenerate or pass --force",
                self.data_dir().display(),
                ds.config_hash
            );
        }
        Ok(ds)
    }

    pub fn load_clips(&self, ds: &Dataset, range: std::ops::Range<usize>) -> anyhow::Result<Vec<Clip>> {
        let start = range.start;
        Ok(try_map_indexed(range.len(), self.opts.exec, |i| ds.load_clip(start + i))?)
    }

    // ---- autoencoders -------------------------------------------------

    fn oaae_variant(stage: Stage) -> Variant {
        if stage == Stage::Oaae {
            Variant::Scat
        } else {
            Variant::Sis
        }
    }

    fn load_oaae(&self, stage: Stage) -> anyhow::Result<Oaae> {
        let path = self.dir.join(Self::checkpoint_rel(stage));
        let ck = Checkpoint::read(&path)?;
        Ok(Oaae::from_checkpoint(&ck, &self.stage_hash(stage), self.opts.force, DTYPE)?)
    }

    /// The autoencoder of `stage` (`Oaae` or `OaaeSis`), trained if needed
    /// and `train` is set.
    pub fn autoencoder(&mut self, stage: Stage, train: bool) -> anyhow::Result<Oaae> {
        if self.is_done(stage) {
            self.log(format!("[{stage}] up to date, skipping"));
            return self.load_oaae(stage);
        }
        if !train {
            let path = self.dir.join(Self::checkpoint_rel(stage));
            if path.exists() {
                return self.load_oaae(stage);
            }
            bail!("{}: missing autoencoder checkpoint; run train-oaae first", path.display());
        }
        let ds = self.require_dataset()?;
        let clips = self.load_clips(&ds, self.cfg.train_range())?;
        self.record(stage, StageStatus::Started, vec![], 0.0, &[])?;
        let t0 = Instant::now();
        let oaae_cfg = self.cfg.oaae_for(Self::oaae_variant(stage));
        let tag = if stage == Stage::Oaae { 1 } else { 3 };
        let model = Oaae::new(&oaae_cfg, ds.schema(), DTYPE, self.cfg.stage_seed(tag))?;
        let pool = FramePool::from_clips(&clips, ds.schema().n_slots());
        let steps = self.cfg.oaae_optim.steps;
        let every = (steps / 10).max(1);
        self.log(format!("[{stage}] {} parameters, {} frames, {steps} steps", model.param_count(), pool.len()));
        let quiet = self.opts.quiet;
        let log = train_oaae(&model, &pool, &self.cfg.oaae_optim, self.cfg.stage_seed(tag + 1), |s, l| {
            if !quiet && ((s + 1) % every == 0 || s == 0) {
                eprintln!("[{stage}] step {:>5}/{steps} loss {l:.5}", s + 1);
            }
        })?;
        self.log(format!(
            "[{stage}] probe loss {:.5} -> {:.5}",
            log.probe_initial.total(oaae_cfg.alpha, oaae_cfg.beta),
            log.probe_final.total(oaae_cfg.alpha, oaae_cfg.beta)
        ));
        let rel = Self::checkpoint_rel(stage);
        let path = self.dir.join(&rel);
        fs::create_dir_all(path.parent().expect("checkpoint dir")).with_context(|| format!("{}", path.display()))?;
        model.to_checkpoint(&self.stage_hash(stage), Some(&log))?.write(&path)?;
        let secs = t0.elapsed().as_secs_f64();
        let heldout = self.load_clips(&ds, self.cfg.test_range())?;
        let psnr = heldout_psnr(&model, &heldout, self.opts.exec)?;
        self.log(format!("[{stage}] held-out reconstruction PSNR {psnr:.2} dB"));
        let params = vec![(stage.to_string(), model.param_count())];
        let metrics = [
            ("heldout_psnr", psnr),
            ("probe_loss_initial", log.probe_initial.total(oaae_cfg.alpha, oaae_cfg.beta)),
            ("probe_loss_final", log.probe_final.total(oaae_cfg.alpha, oaae_cfg.beta)),
        ];
        self.record_with_metrics(stage, StageStatus::Completed, vec![rel], secs, &params, &metrics)?;
        Ok(model)
    }

    // ---- predictors ---------------------------------------------------

    fn load_predictor(&self, stage: Stage) -> anyhow::Result<Predictor> {
        let path = self.dir.join(Self::checkpoint_rel(stage));
        let ck = Checkpoint::read(&path)?;
        Ok(Predictor::from_checkpoint(&ck, &self.stage_hash(stage), self.opts.force, DTYPE)?)
    }

    /// The trained predictor of `variant`, trained first when needed and
    /// `train` is set (its autoencoder must already exist).
    pub fn predictor(&mut self, variant: Variant, train: bool) -> anyhow::Result<Predictor> {
        let stage = Stage::Predictor(variant);
        if self.is_done(stage) {
            self.log(format!("[{stage}] up to date, skipping"));
            return self.load_predictor(stage);
        }
        if !train {
            let path = self.dir.join(Self::checkpoint_rel(stage));
            if path.exists() {
                return self.load_predictor(stage);
            }
            bail!(
                "{}: missing predictor checkpoint; run train-predictor --variant {} first",
                path.display(),
                variant.as_str()
            );
        }
        let oaae = self.autoencoder(Stage::autoencoder_for(variant), false)?;
        let ds = self.require_dataset()?;
        let clips = self.load_clips(&ds, self.cfg.train_range())?;
        self.record(stage, StageStatus::Started, vec![], 0.0, &[])?;
        let t0 = Instant::now();
        let tokens = try_map_indexed(clips.len(), self.opts.exec, |i| tokenize_clip(&oaae, &clips[i]))?;
        let tag = 10 + Variant::ALL.iter().position(|&v| v == variant).expect("known variant");
        let c = &self.cfg;
        let model = build_variant(
            variant,
            ds.schema(),
            &c.oaae_for(variant),
            &c.predictor,
            c.data.resolution,
            c.data.n_frames,
            DTYPE,
            c.stage_seed(tag),
        )?;
        let steps = c.predictor_optim.steps;
        let every = (steps / 10).max(1);
        self.log(format!("[{stage}] {} parameters, {} clips, {steps} steps", model.param_count(), tokens.len()));
        let quiet = self.opts.quiet;
        let log = train_predictor(&model, &oaae, &tokens, &c.predictor_optim, c.stage_seed(tag + 10), |s, l| {
            if !quiet && ((s + 1) % every == 0 || s == 0) {
                eprintln!("[{stage}] step {:>5}/{steps} loss {l:.4}", s + 1);
            }
        })?;
        self.log(format!("[{stage}] probe loss {:.4} -> {:.4}", log.probe_initial, log.probe_final));
        let rel = Self::checkpoint_rel(stage);
        let path = self.dir.join(&rel);
        fs::create_dir_all(path.parent().expect("checkpoint dir")).with_context(|| format!("{}", path.display()))?;
        let oaae_hash = self.stage_hash(Stage::autoencoder_for(variant));
        model.to_checkpoint(&self.stage_hash(stage), &oaae_hash, Some(&log))?.write(&path)?;
        let params = vec![(variant.as_str().to_string(), model.param_count())];
        let metrics = [("probe_loss_initial", log.probe_initial), ("probe_loss_final", log.probe_final)];
        self.record_with_metrics(stage, StageStatus::Completed, vec![rel], t0.elapsed().as_secs_f64(), &params, &metrics)?;
        Ok(model)
    }

    // ---- sampling and evaluation ------------------------------------------

    /// Sampler seed for a (temperature index, clip) pair; shared by all
    /// variants so they see the same random stream.
    pub fn sample_seed(&self, temperature_index: usize, clip: usize) -> u64 {
        ocvp::synthdata::clip_seed(self.cfg.stage_seed(30).wrapping_add(temperature_index as u64), clip)
    }

    /// Rolls out `clips` (dataset indices) from their first
    /// `context_frames` frames; returns the predicted horizon frames.
    pub fn rollouts(
        &self,
        model: &Predictor,
        oaae: &Oaae,
        clips: &[Clip],
        clip_ids: &[usize],
        horizon: usize,
        sampler_for: impl Fn(usize) -> SamplerConfig + Sync + Send,
    ) -> anyhow::Result<Vec<Vec<Frame>>> {
        let ctx = self.cfg.predictor.context_frames;
        Ok(try_map_indexed(clips.len(), self.opts.exec, |i| {
            let c = &clips[i];
            sample_autoregressive(model, oaae, &c.frames[..ctx], &c.masks[..ctx], horizon, &sampler_for(clip_ids[i]))
                .map(|r| r.predicted)
        })?)
    }

    fn evaluate_variant(
        &self,
        variant: Variant,
        clips: &[Clip],
        clip_ids: &[usize],
        collision: &[usize],
    ) -> anyhow::Result<VariantResult> {
        let oaae = self.load_oaae(Stage::autoencoder_for(variant))?;
        let model = self.load_predictor(Stage::Predictor(variant))?;
        let c = &self.cfg;
        let (ctx, horizon) = (c.predictor.context_frames, c.predictor.horizon);
        let mut predictions = Vec::with_capacity(c.eval.temperatures.len());
        for (j, &temperature) in c.eval.temperatures.iter().enumerate() {
            self.log(format!("[evaluate] {} at temperature {temperature}", variant.label()));
            predictions.push(self.rollouts(&model, &oaae, clips, clip_ids, horizon, |id| SamplerConfig {
                temperature,
                argmax: false,
                seed: self.sample_seed(j, id),
            })?);
        }
        let gt: Vec<Vec<Frame>> = clips.iter().map(|cl| cl.frames[ctx..ctx + horizon].to_vec()).collect();
        let full = metrics::evaluate(&predictions, &gt, clip_ids, &c.eval.temperatures, c.eval.n_subsets, self.opts.exec)?;
        let collision_report = if collision.is_empty() {
            None
        } else {
            let pick = |v: &Vec<Vec<Frame>>| -> Vec<Vec<Frame>> { collision.iter().map(|&i| v[i].clone()).collect() };
            let preds: Vec<Vec<Vec<Frame>>> = predictions.iter().map(pick).collect();
            let ids: Vec<usize> = collision.iter().map(|&i| clip_ids[i]).collect();
            Some(metrics::evaluate(&preds, &pick(&gt), &ids, &c.eval.temperatures, c.eval.n_subsets, self.opts.exec)?)
        };
        Ok(VariantResult {
            variant,
            params: model.param_count(),
            subsets: vec![
                SubsetResult { name: "full".into(), n_clips: clip_ids.len(), report: Some(full) },
                SubsetResult { name: "collision".into(), n_clips: collision.len(), report: collision_report },
            ],
        })
    }

    /// Samples every variant over the temperature grid and writes
    /// `report.md`, `report.csv`, `eval/*.csv` and `curves/*`.
    pub fn evaluate(&mut self) -> anyhow::Result<ReportTable> {
        let stage = Stage::Evaluate;
        if self.is_done(stage) {
            self.log(format!("[{stage}] up to date, skipping"));
            return report::read_report(&self.dir.join(report::REPORT_CSV));
        }
        let ds = self.require_dataset()?;
        let range = self.cfg.test_range();
        let clip_ids: Vec<usize> = range.clone().collect();
        let clips = self.load_clips(&ds, range.clone())?;
        let tracks = ds.tracks()?;
        let test_tracks = &tracks[range.clone()];
        let collision = metrics::collision_subset(test_tracks, self.cfg.data.resolution, self.cfg.eval.collision_fraction);
        self.record(stage, StageStatus::Started, vec![], 0.0, &[])?;
        let t0 = Instant::now();
        let mut variants = Vec::new();
        for v in Variant::ALL {
            variants.push(self.evaluate_variant(v, &clips, &clip_ids, &collision)?);
        }
        let mut autoencoders = Vec::new();
        for stage in [Stage::Oaae, Stage::OaaeSis] {
            let oaae = self.load_oaae(stage)?;
            autoencoders.push((stage.to_string(), oaae.param_count(), heldout_psnr(&oaae, &clips, self.opts.exec)?));
        }
        let report = CompareReport {
            config_hash: self.cfg.hash(),
            preset: self.cfg.preset.to_string(),
            resolution: self.cfg.data.resolution,
            n_slots: ds.schema().n_slots(),
            n_classes: ds.schema().n_classes(),
            train_clips: self.cfg.train_range().len(),
            context_frames: self.cfg.predictor.context_frames,
            horizon: self.cfg.predictor.horizon,
            temperatures: self.cfg.eval.temperatures.clone(),
            variants,
            autoencoders,
        };
        let artifacts = report::write_all(&self.dir, &report)?;
        let params: Vec<(String, usize)> = report.variants.iter().map(|v| (v.variant.as_str().to_string(), v.params)).collect();
        self.record(stage, StageStatus::Completed, artifacts, t0.elapsed().as_secs_f64(), &params)?;
        Ok(report.table())
    }

    /// Full controlled comparison, honoring `stop_after`.
    pub fn compare(&mut self) -> anyhow::Result<Flow<ReportTable>> {
        macro_rules! checkpoint {
            ($stage:expr) => {
                if self.opts.stop_after == Some($stage) {
                    self.log(format!("stopping after {}", $stage));
                    return Ok(Flow::Stopped($stage));
                }
            };
        }
        self.ensure_dataset()?;
        checkpoint!(Stage::Generate);
        for stage in [Stage::Oaae, Stage::OaaeSis] {
            self.autoencoder(stage, true)?;
            checkpoint!(stage);
        }
        for v in Variant::ALL {
            self.predictor(v, true)?;
            checkpoint!(Stage::Predictor(v));
        }
        Ok(Flow::Done(self.evaluate()?))
    }

    /// Writes argmax or sampled rollouts of `clip_ids` as clip files under
    /// `predictions/<variant>/`; returns the file paths.
    pub fn predict(
        &mut self,
        variant: Variant,
        clip_ids: &[usize],
        horizon: usize,
        sampler: SamplerConfig,
    ) -> anyhow::Result<Vec<PathBuf>> {
        sampler.validate()?;
        let oaae = self.autoencoder(Stage::autoencoder_for(variant), false)?;
        let model = self.predictor(variant, false)?;
        let ds = self.require_dataset()?;
        let clips = clip_ids.iter().map(|&i| ds.load_clip(i)).collect::<ocvp::Result<Vec<_>>>()?;
        let ctx = self.cfg.predictor.context_frames;
        let base = sampler.seed;
        let rolls = self.rollouts(&model, &oaae, &clips, clip_ids, horizon, |id| SamplerConfig {
            seed: ocvp::synthdata::clip_seed(base, id),
            ..sampler
        })?;
        let dir = self.dir.join("predictions").join(variant.as_str());
        fs::create_dir_all(&dir).with_context(|| format!("{}", dir.display()))?;
        let mut paths = Vec::new();
        for ((clip, pred), &id) in clips.iter().zip(rolls).zip(clip_ids) {
            let mut frames = clip.frames[..ctx].to_vec();
            frames.extend(pred);
            let path = dir.join(clip_file_name(id));
            Clip::from_frames(frames).write(&path)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Mean PSNR of autoencoder reconstructions over every frame of `clips`.
pub fn heldout_psnr(oaae: &Oaae, clips: &[Clip], exec: Execution) -> anyhow::Result<f64> {
    let per_clip = try_map_indexed(clips.len(), exec, |i| {
        let c = &clips[i];
        let f: Vec<&Frame> = c.frames.iter().collect();
        let m: Vec<&PanopticMask> = c.masks.iter().collect();
        let batch = FrameBatch::new(&f, &m, oaae.schema().n_slots(), oaae.dtype())?;
        let recon = tensor_to_frames(&oaae.reconstruct(&batch)?)?;
        let mut sum = 0.0;
        for (r, x) in recon.iter().zip(&c.frames) {
            sum += metrics::psnr_frames(r, x)?;
        }
        Ok::<_, ocvp::Error>((sum, recon.len()))
    })?;
    let (sum, n) = per_clip.iter().fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
    if n == 0 {
        return Err(anyhow!("no frames to reconstruct"));
    }
    Ok(sum / n as f64)
}

/// Content digest of a dataset directory (manifest, sidecars and every clip
/// file, in a fixed order).
pub fn dataset_digest(ds: &Dataset) -> anyhow::Result<String> {
    let mut bytes = Vec::new();
    let mut names = vec![
        ocvp::synthdata::MANIFEST_FILE.to_string(),
        ocvp::synthdata::TRACKS_FILE.to_string(),
        ocvp::synthdata::CONTACTS_FILE.to_string(),
    ];
    names.extend((0..ds.n_clips()).map(clip_file_name));
    for name in names {
        let path = ds.dir.join(&name);
        let data = fs::read(&path).with_context(|| format!("{}", path.display()))?;
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(data.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&data);
    }
    Ok(sha256_hex(&bytes))
}

/// Builds each variant (untrained) and reports its parameter count.
pub fn parameter_table(cfg: &ExperimentConfig) -> anyhow::Result<Vec<(Variant, usize, usize)>> {
    let schema = cfg.dataset_spec().schema;
    Variant::ALL
        .into_iter()
        .map(|v| {
            let m = build_variant(
                v,
                &schema,
                &cfg.oaae_for(v),
                &cfg.predictor,
                cfg.data.resolution,
                cfg.data.n_frames,
                DTYPE,
                0,
            )?;
            Ok((v, m.shape().slot_dim, m.param_count()))
        })
        .collect()
}
