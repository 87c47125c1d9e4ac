//! Run configuration: a JSON file with full-default fallback.
//!
//! Every section is optional; missing fields take the study defaults
//! (30 epochs, batch 8, lr 2e-4, the four-domain registry, the
//! [-1024, 3072] HU window). The effective configuration is echoed so runs
//! are diffable.

use anyhow::{Context, Result};
use kernel_harmony::domains::KernelDomain;
use kernel_harmony::losses::LossConfig;
use kernel_harmony::networks::ArchConfig;
use kernel_harmony::phantom::{PhantomConfig, StyleParams};
use kernel_harmony::trainer::TrainConfig;
use kernel_harmony::volume::NormalizationSpec;
use kernel_harmony::DomainRegistry;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Training manifest CSV (columns `domain` and `path` at minimum).
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub normalization: NormalizationSpec,
    /// Kernel domains; defaults to the four study domains.
    pub registry: Option<Vec<KernelDomain>>,
    pub phantom: PhantomConfig,
    /// Per-domain phantom styles; defaults to the built-in set.
    pub phantom_styles: Option<BTreeMap<String, StyleParams>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            normalization: NormalizationSpec::default(),
            registry: None,
            phantom: PhantomConfig::default(),
            phantom_styles: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config `{}`", path.display()))?;
                let config: RunConfig = serde_json::from_str(&text)
                    .with_context(|| format!("invalid config `{}`", path.display()))?;
                Ok(config)
            }
        }
    }

    pub fn registry(&self) -> Result<DomainRegistry> {
        match &self.registry {
            None => Ok(DomainRegistry::paper_default()),
            Some(domains) => Ok(DomainRegistry::new(domains.clone())?),
        }
    }

    pub fn styles(&self) -> BTreeMap<String, StyleParams> {
        self.phantom_styles
            .clone()
            .unwrap_or_else(kernel_harmony::phantom::default_styles)
    }

    /// Canonical JSON of the effective configuration.
    pub fn echo(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn sha256(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self)?;
        Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
    }
}

/// Resolves a possibly-relative dataset path: tried as-is first, then under
/// `KERNEL_HARMONY_CACHE` when that is set.
pub fn resolve_dataset_path(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    if let Ok(cache) = std::env::var("KERNEL_HARMONY_CACHE") {
        let candidate = Path::new(&cache).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}
