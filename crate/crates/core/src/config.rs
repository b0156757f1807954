//! Run configuration, optionally read from a flat `key = value` file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::DEFAULT_TOL;
use crate::spectral::SpectralConfig;

pub const CACHE_ENV: &str = "EQVIDX_CACHE";
pub const DEFAULT_CACHE_DIR: &str = ".eqvidx-cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Integrator tolerance for profile curves.
    pub tol: f64,
    pub spectral: SpectralConfig,
    pub max_m: u32,
    pub max_ell: usize,
    /// Curve cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Mesh levels in the known-field residual study.
    pub residual_levels: u32,
    /// Randomized partition instances in the verification suite.
    pub random_instances: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol: DEFAULT_TOL,
            spectral: SpectralConfig::default(),
            max_m: 8,
            max_ell: 6,
            cache_dir: None,
            residual_levels: 7,
            random_instances: 200,
            seed: 0x5eed,
        }
    }
}

/// `$EQVIDX_CACHE`, or `./.eqvidx-cache`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl Config {
    /// Defaults with the cache directory taken from the environment.
    pub fn with_env_cache() -> Self {
        Config {
            cache_dir: Some(default_cache_dir()),
            ..Config::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tol" => self.tol = parse(key, value)?,
            "mesh" | "base_elements" => self.spectral.base_elements = parse(key, value)?,
            "max_level" => self.spectral.max_level = parse(key, value)?,
            "target_tol" => self.spectral.target_tol = parse(key, value)?,
            "max_m" => self.max_m = parse(key, value)?,
            "max_ell" => self.max_ell = parse(key, value)?,
            "residual_levels" => self.residual_levels = parse(key, value)?,
            "random_instances" => self.random_instances = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "cache" => {
                let on: bool = parse(key, value)?;
                self.cache_dir = match (on, self.cache_dir.take()) {
                    (false, _) => None,
                    (true, Some(d)) => Some(d),
                    (true, None) => Some(default_cache_dir()),
                };
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. Values are not
    /// cross-checked until [`validate`](Self::validate), so later overrides
    /// can repair them.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", no + 1)));
            };
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::Config(format!("tol must lie in (0, 1e-3); got {}", self.tol)));
        }
        if self.spectral.base_elements < 8 {
            return Err(Error::Config("mesh must be at least 8 elements".into()));
        }
        if !(self.spectral.target_tol > 0.0) {
            return Err(Error::Config("target_tol must be positive".into()));
        }
        if self.max_m == 0 || self.max_ell == 0 {
            return Err(Error::Config("max_m and max_ell must be positive".into()));
        }
        if self.residual_levels < 2 {
            return Err(Error::Config("residual_levels must be at least 2".into()));
        }
        Ok(())
    }
}
