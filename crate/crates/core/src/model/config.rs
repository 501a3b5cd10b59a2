use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Dncnn,
    Rcnn,
    Unet,
    Densenet,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Dncnn, Arch::Rcnn, Arch::Unet, Arch::Densenet];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Dncnn => "dncnn",
            Arch::Rcnn => "rcnn",
            Arch::Unet => "unet",
            Arch::Densenet => "densenet",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dncnn" => Ok(Arch::Dncnn),
            "rcnn" => Ok(Arch::Rcnn),
            "unet" => Ok(Arch::Unet),
            "densenet" => Ok(Arch::Densenet),
            other => Err(Error::config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Architecture and initialization settings.
///
/// `depth` means the number of conv layers for `dncnn`, the number of body
/// layers for `rcnn` and the number of layers per block for `densenet`; the
/// `unet` layer table is fixed and ignores it. `channels` is the
/// intermediate width (for `unet` the first two layers use `channels / 2`).
///
/// When deserialized, omitted fields take the [`ModelConfig::desk`] values
/// of the named architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialModelConfig")]
pub struct ModelConfig {
    pub arch: Arch,
    pub depth: usize,
    pub channels: usize,
    pub bias_enabled: bool,
    /// Normalization on the intermediate layers (`dncnn` only).
    pub norm_enabled: bool,
    /// Recurrence steps at inference; training samples `1..=t_max`.
    pub recurrence_t_max: usize,
    pub precision: Precision,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialModelConfig {
    arch: Option<Arch>,
    depth: Option<usize>,
    channels: Option<usize>,
    bias_enabled: Option<bool>,
    norm_enabled: Option<bool>,
    recurrence_t_max: Option<usize>,
    precision: Option<Precision>,
    seed: Option<u64>,
}

impl From<PartialModelConfig> for ModelConfig {
    fn from(p: PartialModelConfig) -> Self {
        let d = ModelConfig::desk(p.arch.unwrap_or(Arch::Dncnn));
        Self {
            arch: d.arch,
            depth: p.depth.unwrap_or(d.depth),
            channels: p.channels.unwrap_or(d.channels),
            bias_enabled: p.bias_enabled.unwrap_or(d.bias_enabled),
            norm_enabled: p.norm_enabled.unwrap_or(d.norm_enabled),
            recurrence_t_max: p.recurrence_t_max.unwrap_or(d.recurrence_t_max),
            precision: p.precision.unwrap_or(d.precision),
            seed: p.seed.unwrap_or(d.seed),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk(Arch::Dncnn)
    }
}

impl ModelConfig {
    /// Published full-size layout of each architecture.
    pub fn full(arch: Arch) -> Self {
        let (depth, norm) = match arch {
            Arch::Dncnn => (20, true),
            Arch::Rcnn => (5, false),
            Arch::Unet => (9, false),
            Arch::Densenet => (5, false),
        };
        Self {
            arch,
            depth,
            channels: 64,
            bias_enabled: true,
            norm_enabled: norm,
            recurrence_t_max: 4,
            precision: Precision::F32,
            seed: 0,
        }
    }

    /// Reduced widths that train in minutes on one CPU core.
    pub fn desk(arch: Arch) -> Self {
        let (depth, channels) = match arch {
            Arch::Dncnn => (8, 32),
            Arch::Rcnn => (5, 16),
            Arch::Unet => (9, 16),
            Arch::Densenet => (5, 16),
        };
        Self {
            depth,
            channels,
            ..Self::full(arch)
        }
    }

    pub fn with_bias(mut self, bias_enabled: bool) -> Self {
        self.bias_enabled = bias_enabled;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::config(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.channels < 1 {
            return Err(Error::config("channels must be >= 1"));
        }
        if self.recurrence_t_max < 1 {
            return Err(Error::config("recurrence_t_max must be >= 1"));
        }
        if self.norm_enabled && self.arch != Arch::Dncnn {
            return Err(Error::config(format!(
                "normalization is only supported for dncnn, not {}",
                self.arch.name()
            )));
        }
        if self.norm_enabled && self.depth < 3 {
            return Err(Error::config(
                "normalized dncnn needs depth >= 3 (normalization sits on layers 2..L-1)",
            ));
        }
        if self.arch == Arch::Unet && self.channels < 2 {
            return Err(Error::config("unet needs channels >= 2"));
        }
        Ok(())
    }
}
