use crate::error::{Error, Result};
use crate::kv::{format_list, KvMap};
use crate::synthdata::SceneSchema;

/// Architecture and loss weights of the object-aware autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct OaaeConfig {
    /// d: channels of each instance's latent vector.
    pub embed_dim: usize,
    /// K: codebook entries per class.
    pub codebook_size: usize,
    /// Channels per down/up-sampling stage; `len` equals log2 of the
    /// downsample factor.
    pub hidden_dims: Vec<usize>,
    pub n_residual_layers: usize,
    pub downsample_factor: usize,
    /// Weight of the encoder/decoder feature-matching term.
    pub alpha: f64,
    /// Weight of the commitment term.
    pub beta: f64,
    /// Per-class encoders over masked instances (`true`) or one encoder over
    /// raw frames with an `N·d` latent (`false`).
    pub decomposed: bool,
}

impl Default for OaaeConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            codebook_size: 128,
            hidden_dims: vec![32, 64],
            n_residual_layers: 2,
            downsample_factor: 4,
            alpha: 1.0,
            beta: 0.25,
            decomposed: true,
        }
    }
}

impl OaaeConfig {
    /// Number of down-sampling stages, L.
    pub fn n_stages(&self) -> usize {
        self.downsample_factor.trailing_zeros() as usize
    }

    /// Latent channels of a single encoder: `d`, or `N·d` when not decomposed.
    pub fn encoder_embed_dim(&self, schema: &SceneSchema) -> usize {
        if self.decomposed {
            self.embed_dim
        } else {
            schema.n_slots() * self.embed_dim
        }
    }

    /// Channels the decoder consumes; always `N·d`.
    pub fn joint_dim(&self, schema: &SceneSchema) -> usize {
        schema.n_slots() * self.embed_dim
    }

    /// Checks every constraint and reports all violations at once.
    /// `resolution` is the frame side length when known.
    pub fn validate(&self, resolution: Option<usize>) -> Result<()> {
        let mut errs = Vec::new();
        if self.embed_dim < 4 {
            errs.push(format!("oaae.embed_dim must be >= 4 (got {})", self.embed_dim));
        }
        if self.codebook_size < 2 {
            errs.push(format!("oaae.codebook_size must be >= 2 (got {})", self.codebook_size));
        }
        if !self.downsample_factor.is_power_of_two() || self.downsample_factor < 2 {
            errs.push(format!(
                "oaae.downsample_factor must be a power of two >= 2 (got {})",
                self.downsample_factor
            ));
        } else if self.hidden_dims.len() != self.n_stages() {
            errs.push(format!(
                "oaae.hidden_dims needs one entry per stage ({} for factor {}), got {}",
                self.n_stages(),
                self.downsample_factor,
                self.hidden_dims.len()
            ));
        }
        if self.hidden_dims.contains(&0) {
            errs.push("oaae.hidden_dims entries must be positive".into());
        }
        if let Some(res) = resolution {
            if self.downsample_factor == 0 || res % self.downsample_factor != 0 {
                errs.push(format!(
                    "oaae.downsample_factor {} must divide the frame size {res}",
                    self.downsample_factor
                ));
            }
        }
        for (name, v) in [("oaae.alpha", self.alpha), ("oaae.beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                errs.push(format!("{name} must be finite and >= 0 (got {v})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("embed_dim", self.embed_dim);
        kv.insert("codebook_size", self.codebook_size);
        kv.insert("hidden_dims", format_list(&self.hidden_dims));
        kv.insert("n_residual_layers", self.n_residual_layers);
        kv.insert("downsample_factor", self.downsample_factor);
        kv.insert("alpha", self.alpha);
        kv.insert("beta", self.beta);
        kv.insert("decomposed", self.decomposed);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        Ok(Self {
            embed_dim: kv.parse_value("embed_dim")?,
            codebook_size: kv.parse_value("codebook_size")?,
            hidden_dims: kv.parse_list("hidden_dims")?,
            n_residual_layers: kv.parse_value("n_residual_layers")?,
            downsample_factor: kv.parse_value("downsample_factor")?,
            alpha: kv.parse_value("alpha")?,
            beta: kv.parse_value("beta")?,
            decomposed: kv.parse_value("decomposed")?,
        })
    }
}

/// Adaptive-moment optimizer settings shared by every training loop.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
}

impl OptimConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            errs.push(format!("{prefix}.learning_rate must be > 0 (got {})", self.learning_rate));
        }
        if self.batch_size == 0 {
            errs.push(format!("{prefix}.batch_size must be >= 1"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("learning_rate", self.learning_rate);
        kv.insert("steps", self.steps);
        kv.insert("batch_size", self.batch_size);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        Ok(Self {
            learning_rate: kv.parse_value("learning_rate")?,
            steps: kv.parse_value("steps")?,
            batch_size: kv.parse_value("batch_size")?,
        })
    }
}
