//! Pipeline configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterParams;
use crate::corpus::{EventFormat, FilterConfig};
use crate::error::{Error, Result};
use crate::latent::{ScoreScaling, SvdOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: EventFormat,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("events.csv"),
            format: EventFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Nearest neighbors selected per user.
    pub k: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Candidate threshold on φ.
    pub phi_threshold: f64,
    pub sweep_points: usize,
    pub hist_bins: usize,
    /// Moving-average window for valley detection (odd).
    pub valley_window: usize,
    /// Significance level for the Bonferroni-corrected critical φ.
    pub alpha: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            phi_threshold: 0.67,
            sweep_points: 100,
            hist_bins: 50,
            valley_window: 5,
            alpha: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentConfig {
    pub rank: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub oversample: usize,
    pub scaling: ScoreScaling,
}

impl Default for LatentConfig {
    fn default() -> Self {
        let svd = SvdOptions::default();
        Self {
            rank: svd.rank,
            tol: svd.tol,
            max_iter: svd.max_iter,
            oversample: svd.oversample,
            scaling: svd.scaling,
        }
    }
}

impl LatentConfig {
    pub fn svd_options(&self, seed: u64) -> SvdOptions {
        SvdOptions {
            rank: self.rank,
            seed,
            tol: self.tol,
            max_iter: self.max_iter,
            oversample: self.oversample,
            scaling: self.scaling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub input: InputConfig,
    pub filter: FilterConfig,
    pub graph: GraphConfig,
    pub analysis: AnalysisConfig,
    pub latent: LatentConfig,
    pub cluster: ClusterParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 42,
            input: InputConfig::default(),
            filter: FilterConfig::default(),
            graph: GraphConfig::default(),
            analysis: AnalysisConfig::default(),
            latent: LatentConfig::default(),
            cluster: ClusterParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Canonical TOML rendering; every key is written.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets one key given as a dotted path (`analysis.phi_threshold`,
    /// `cluster.min_samples`, `seed`). The value is read as a TOML literal,
    /// falling back to a plain string (`input.path=data/x.csv`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));

        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().filter(|l| !l.is_empty());
        let mut node = &mut root;
        for part in &parts {
            node = node
                .get_mut(*part)
                .filter(|v| v.is_table())
                .ok_or_else(|| Error::Config(format!("unknown configuration section `{part}`")))?;
        }
        let (Some(leaf), Some(table)) = (leaf, node.as_table_mut()) else {
            return Err(Error::Config(format!("invalid configuration key `{key}`")));
        };
        table.insert(leaf.to_string(), parsed);
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("`{key}`: {}", e.message())))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.cluster.validate()?;
        if self.graph.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        let a = &self.analysis;
        if !(0.0..=1.0).contains(&a.phi_threshold) {
            return Err(Error::Config(format!(
                "phi_threshold {} outside [0, 1]",
                a.phi_threshold
            )));
        }
        if a.sweep_points == 0 || a.hist_bins == 0 {
            return Err(Error::Config(
                "sweep_points and hist_bins must be positive".into(),
            ));
        }
        if a.valley_window == 0 || a.valley_window.is_multiple_of(2) {
            return Err(Error::Config(
                "valley_window must be a positive odd number".into(),
            ));
        }
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", a.alpha)));
        }
        if self.latent.rank == 0
            || self.latent.tol.is_nan()
            || self.latent.tol <= 0.0
            || self.latent.max_iter == 0
        {
            return Err(Error::Config(
                "latent rank, tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}
