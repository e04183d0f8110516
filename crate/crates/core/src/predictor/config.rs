use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KvMap;

/// The three predictor families compared at matched capacity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Slots with self-attention plus cross-attention between slots.
    Scat,
    /// Slots with self-attention only; cross-attention replaced by a
    /// per-slot feed-forward of matched size.
    Sncat,
    /// One wide slot for the whole scene, fed by the single-encoder
    /// autoencoder.
    Sis,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Sis, Variant::Sncat, Variant::Scat];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Scat => "scat",
            Variant::Sncat => "sncat",
            Variant::Sis => "sis",
        }
    }

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Scat => "SCAT",
            Variant::Sncat => "SNCAT",
            Variant::Sis => "SiS",
        }
    }

    /// Whether the variant consumes per-slot tokens from the decomposed
    /// autoencoder.
    pub fn decomposed(self) -> bool {
        !matches!(self, Variant::Sis)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "scat" => Ok(Variant::Scat),
            "sncat" => Ok(Variant::Sncat),
            "sis" => Ok(Variant::Sis),
            other => Err(format!("unknown variant `{other}` (expected scat, sncat or sis)")),
        }
    }
}

/// Architecture and training-noise settings of a predictor. `model_dim` is
/// the per-instance width; the monolithic variant multiplies it by N.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorConfig {
    pub model_dim: usize,
    pub n_heads: usize,
    pub depth: usize,
    pub ff_expansion: usize,
    pub dropout: f64,
    /// T: conditioning frames at sampling time.
    pub context_frames: usize,
    /// M: frames predicted after the context.
    pub horizon: usize,
    /// Standard deviation of the pixel noise added to training inputs.
    pub noise_std: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            model_dim: 32,
            n_heads: 4,
            depth: 2,
            ff_expansion: 2,
            dropout: 0.1,
            context_frames: 5,
            horizon: 5,
            noise_std: 0.1,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.model_dim == 0 || self.n_heads == 0 || self.model_dim % self.n_heads != 0 {
            errs.push(format!(
                "predictor.model_dim ({}) must be a positive multiple of predictor.n_heads ({})",
                self.model_dim, self.n_heads
            ));
        }
        if self.depth == 0 {
            errs.push("predictor.depth must be >= 1".into());
        }
        if self.ff_expansion == 0 {
            errs.push("predictor.ff_expansion must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            errs.push(format!("predictor.dropout must be in [0, 1) (got {})", self.dropout));
        }
        if self.context_frames == 0 {
            errs.push("predictor.context_frames must be >= 1".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            errs.push(format!("predictor.noise_std must be >= 0 (got {})", self.noise_std));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("model_dim", self.model_dim);
        kv.insert("n_heads", self.n_heads);
        kv.insert("depth", self.depth);
        kv.insert("ff_expansion", self.ff_expansion);
        kv.insert("dropout", self.dropout);
        kv.insert("context_frames", self.context_frames);
        kv.insert("horizon", self.horizon);
        kv.insert("noise_std", self.noise_std);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        Ok(Self {
            model_dim: kv.parse_value("model_dim")?,
            n_heads: kv.parse_value("n_heads")?,
            depth: kv.parse_value("depth")?,
            ff_expansion: kv.parse_value("ff_expansion")?,
            dropout: kv.parse_value("dropout")?,
            context_frames: kv.parse_value("context_frames")?,
            horizon: kv.parse_value("horizon")?,
            noise_std: kv.parse_value("noise_std")?,
        })
    }
}

/// Temperature-controlled sampling settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub temperature: f64,
    /// Take the most likely token instead of sampling (the zero-temperature
    /// limit).
    pub argmax: bool,
    pub seed: u64,
}

pub const MAX_TEMPERATURE: f64 = 10.0;

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.argmax {
            return Ok(());
        }
        if !(self.temperature > 0.0 && self.temperature <= MAX_TEMPERATURE) {
            return Err(Error::InvalidTemperature(self.temperature));
        }
        Ok(())
    }
}
