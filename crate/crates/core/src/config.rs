//! Run configuration: a flat JSON document whose keys mirror the usual
//! symbols (`K`, `T`, `N`, `alpha`, ...). Missing keys take defaults.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::{DEFAULT_GAMMA, DEFAULT_PROXY_SIGMA, DEFAULT_SIGMA};
use crate::costvolume::DEFAULT_LOOKUP_RADIUS;
use crate::error::{Error, Result};
use crate::features::{Scale, DEFAULT_CHANNELS, DEFAULT_POOL_FACTOR};
use crate::memory::{CounterMode, MemoryMode, DEFAULT_K};
use crate::refine::gru::DEFAULT_HIDDEN;

/// Which frames enter the dynamic memory and whether play is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Every memory frame, with play.
    Full,
    /// The `K` frames ending at the target, plain read-out.
    Latest,
    /// A seeded uniform `K`-subset, with play.
    Random,
    /// Quality-scored top-`K` with play.
    #[default]
    Ppm,
    /// Quality-scored top-`K`, plain read-out.
    PickOnly,
    /// The latest-`K` window, with play.
    PlayOnly,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Full,
        Policy::Latest,
        Policy::Random,
        Policy::Ppm,
        Policy::PickOnly,
        Policy::PlayOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Full => "full",
            Policy::Latest => "latest",
            Policy::Random => "random",
            Policy::Ppm => "ppm",
            Policy::PickOnly => "pick-only",
            Policy::PlayOnly => "play-only",
        }
    }

    /// Whether play weights and positional encodings are applied.
    pub fn play(self) -> bool {
        !matches!(self, Policy::Latest | Policy::PickOnly)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// Source of the per-pixel confidence maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceSource {
    /// Photometric consistency of the current disparity.
    #[default]
    Proxy,
    /// A trained [`ConfidenceHead`](crate::confidence::ConfidenceHead) loaded from `head_path`.
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frames kept in the dynamic memory.
    #[serde(rename = "K")]
    pub k: usize,
    /// Use only the first `T` frames of the input.
    #[serde(rename = "T")]
    pub frames: Option<usize>,
    /// Refinement iterations per frame.
    #[serde(rename = "N")]
    pub iterations: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub scale: f64,
    pub policy: Policy,
    pub counter_mode: CounterMode,
    pub memory_mode: MemoryMode,
    pub seed: u64,
    pub channels: usize,
    pub hidden: usize,
    pub pool_factor: usize,
    pub radius: usize,
    /// Disparity range at the working scale; half the grid width when unset.
    pub max_disparity: Option<usize>,
    pub confidence: ConfidenceSource,
    pub head_path: Option<PathBuf>,
    pub sigma_p: f64,
    pub positional_encoding: bool,
    /// When false the read-out is skipped and `F_agg = F_cost`.
    pub memory: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            frames: None,
            iterations: 10,
            alpha: 0.5,
            sigma: DEFAULT_SIGMA,
            gamma: DEFAULT_GAMMA,
            scale: 0.25,
            policy: Policy::Ppm,
            counter_mode: CounterMode::Reset,
            memory_mode: MemoryMode::Offline,
            seed: 0,
            channels: DEFAULT_CHANNELS,
            hidden: DEFAULT_HIDDEN,
            pool_factor: DEFAULT_POOL_FACTOR,
            radius: DEFAULT_LOOKUP_RADIUS,
            max_disparity: None,
            confidence: ConfidenceSource::Proxy,
            head_path: None,
            sigma_p: DEFAULT_PROXY_SIGMA,
            positional_encoding: true,
            memory: true,
        }
    }
}

impl PipelineConfig {
    /// Defaults with `N = 20`.
    pub fn evaluation() -> Self {
        Self {
            iterations: 20,
            ..Self::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn scale(&self) -> Result<Scale> {
        Scale::from_value(self.scale)
            .ok_or_else(|| Error::Config(format!("scale must be 1/16, 1/8 or 1/4, got {}", self.scale)))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return fail("K must be at least 1".into());
        }
        if self.iterations == 0 {
            return fail("N must be at least 1".into());
        }
        if self.frames == Some(0) {
            return fail("T must be at least 1".into());
        }
        if !self.alpha.is_finite() {
            return fail(format!("alpha must be finite, got {}", self.alpha));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 || self.sigma_p.is_nan() || self.sigma_p <= 0.0 {
            return fail("sigma and sigma_p must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        self.scale()?;
        if self.channels < 4 {
            return fail(format!("channels must be at least 4, got {}", self.channels));
        }
        if self.hidden == 0 || self.pool_factor == 0 {
            return fail("hidden and pool_factor must be positive".into());
        }
        if self.max_disparity == Some(0) {
            return fail("max_disparity must be positive".into());
        }
        if self.confidence == ConfidenceSource::Head && self.head_path.is_none() {
            return fail("confidence \"head\" requires head_path".into());
        }
        Ok(())
    }
}
