//! Engine configuration: an optional TOML file (usually named by
//! `HEADZOOM_CONFIG`) with command-line flags layered on top.
//!
//! The file mirrors [`EngineConfig`]; every table is optional:
//!
//! ```toml
//! mode = "tilt"
//!
//! [zoom]
//! min = 1.0
//! max = 6.0
//!
//! [guard]
//! max_speed_mps = 2.0
//! gap_timeout_s = 0.5
//!
//! [schedule]          # replaces the built-in Q/R curves
//! mode = "tilt"
//! q = [[0.0, 0.01], [1.0, 0.01]]
//! r = [[0.0, 0.0001], [0.5, 0.0001], [1.0, 0.1]]
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use headzoom::{EngineConfig, Mode, ZoomRange};

pub const CONFIG_ENV: &str = "HEADZOOM_CONFIG";

/// Flag values that override the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub zoom_min: Option<f64>,
    pub zoom_max: Option<f64>,
}

pub fn load(path: &Path) -> Result<EngineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn resolve(path: Option<&Path>, overrides: Overrides) -> Result<EngineConfig> {
    let mut config = match path {
        Some(p) => load(p)?,
        None => EngineConfig::default(),
    };
    if let Some(mode) = overrides.mode {
        config.mode = mode;
    }
    if overrides.zoom_min.is_some() || overrides.zoom_max.is_some() {
        config.zoom = ZoomRange::new(
            overrides.zoom_min.unwrap_or(config.zoom.min()),
            overrides.zoom_max.unwrap_or(config.zoom.max()),
        )?;
    }
    Ok(config)
}
