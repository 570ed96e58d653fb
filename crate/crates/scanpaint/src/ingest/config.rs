//! Run configuration. A TOML file mirrors the command-line flags; flags
//! given explicitly on the command line win over file values.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// How the initial registration guess is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseMode {
    /// Match the bounding boxes of the two clouds.
    Bbox,
    /// Fit a similarity to a hand-picked correspondence list.
    Corr,
    /// Read a previously saved transform.
    File,
}

impl FromStr for CoarseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bbox" => Ok(Self::Bbox),
            "corr" => Ok(Self::Corr),
            "file" => Ok(Self::File),
            other => Err(format!("unknown coarse mode \"{other}\", expected bbox, corr, or file")),
        }
    }
}

impl std::fmt::Display for CoarseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bbox => "bbox",
            Self::Corr => "corr",
            Self::File => "file",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scan: Option<PathBuf>,
    pub bundler: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub transform: Option<PathBuf>,
    pub correspondences: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub coarse: CoarseMode,
    pub block_size: usize,
    pub search_radius: usize,
    pub best_k: usize,
    pub sicp_tolerance: f64,
    pub sicp_max_iterations: usize,
    pub rotation_restarts: usize,
    /// Extra depth slack when deciding pixel visibility; `None` picks
    /// 0.5% of the scan's bounding-box diagonal.
    pub visibility_epsilon: Option<f64>,
    pub splat_radius: usize,
    pub border_delta: f64,
    pub depth_discontinuity_fraction: f64,
    pub correction: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scan: None,
            bundler: None,
            images: None,
            output: None,
            transform: None,
            correspondences: None,
            cache_dir: None,
            coarse: CoarseMode::Bbox,
            block_size: 7,
            search_radius: 15,
            best_k: 3,
            sicp_tolerance: 1e-6,
            sicp_max_iterations: 100,
            rotation_restarts: 40,
            visibility_epsilon: None,
            splat_radius: 2,
            border_delta: 20.0,
            depth_discontinuity_fraction: 0.01,
            correction: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, IngestError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |m: String| Err(IngestError::Config(m));
        if self.block_size % 2 == 0 || self.block_size == 0 {
            return fail(format!("block_size must be odd, got {}", self.block_size));
        }
        if self.best_k == 0 {
            return fail("best_k must be at least 1".into());
        }
        if !(self.sicp_tolerance > 0.0) || !self.sicp_tolerance.is_finite() {
            return fail(format!("sicp_tolerance must be positive, got {}", self.sicp_tolerance));
        }
        if self.sicp_max_iterations == 0 {
            return fail("sicp_max_iterations must be at least 1".into());
        }
        if let Some(eps) = self.visibility_epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return fail(format!("visibility_epsilon must be positive, got {eps}"));
            }
        }
        if !(self.border_delta > 0.0) || !self.border_delta.is_finite() {
            return fail(format!("border_delta must be positive, got {}", self.border_delta));
        }
        let frac = self.depth_discontinuity_fraction;
        if !(frac > 0.0 && frac < 1.0) {
            return fail(format!(
                "depth_discontinuity_fraction must be in (0, 1), got {frac}"
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.block_size, 7);
        assert_eq!(cfg.search_radius, 15);
        assert_eq!(cfg.best_k, 3);
        assert_eq!(cfg.coarse, CoarseMode::Bbox);
        assert!(cfg.correction);
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let cfg = RunConfig::parse(
            "block_size = 9\nseed = 7\ncoarse = \"corr\"\nscan = \"a/scan.ply\"\n",
        )
        .unwrap();
        assert_eq!(cfg.block_size, 9);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.coarse, CoarseMode::Corr);
        assert_eq!(cfg.scan.as_deref(), Some(std::path::Path::new("a/scan.ply")));
        assert_eq!(cfg.search_radius, 15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("block_sixe = 9\n").unwrap_err();
        assert!(err.to_string().contains("block_sixe"), "{err}");
    }

    #[test]
    fn even_block_size_is_rejected() {
        let err = RunConfig::parse("block_size = 8\n").unwrap_err();
        assert!(err.to_string().contains("odd"), "{err}");
    }

    #[test]
    fn coarse_mode_round_trips_through_strings() {
        for mode in [CoarseMode::Bbox, CoarseMode::Corr, CoarseMode::File] {
            assert_eq!(mode.to_string().parse::<CoarseMode>().unwrap(), mode);
        }
        assert!("nearest".parse::<CoarseMode>().is_err());
    }

    #[test]
    fn config_serializes_back_to_toml() {
        let mut cfg = RunConfig::default();
        cfg.seed = 123;
        cfg.output = Some(PathBuf::from("out"));
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
