//! Kernel domain registry and harmonization path enumeration.
//!
//! A *domain* is one reconstruction kernel of one vendor (e.g. Siemens B30f).
//! With four domains there are six unordered harmonization directions and
//! twelve ordered translation paths (each direction forward and backward).
//! Every path maps onto one source encoder, one target decoder and the target
//! domain's discriminator.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Vendor {
    Siemens,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Hardness {
    Hard,
    Soft,
}

/// One reconstruction kernel of one vendor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelDomain {
    /// Short stable identifier, unique within a registry (e.g. `siemens_b30f`).
    pub id: String,
    pub vendor: Vendor,
    /// Vendor kernel name (B30f, B50f, BONE, STD).
    pub kernel_name: String,
    pub hardness: Hardness,
}

impl KernelDomain {
    pub fn new(id: &str, vendor: Vendor, kernel_name: &str, hardness: Hardness) -> Self {
        KernelDomain {
            id: id.to_string(),
            vendor,
            kernel_name: kernel_name.to_string(),
            hardness,
        }
    }
}

/// An ordered (source, target) pair of domain ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TranslationPath {
    pub source: String,
    pub target: String,
}

impl TranslationPath {
    pub fn new(source: &str, target: &str) -> Result<Self> {
        if source == target {
            return Err(Error::Config(format!(
                "translation path must connect two distinct domains, got `{source}` twice"
            )));
        }
        Ok(TranslationPath {
            source: source.to_string(),
            target: target.to_string(),
        })
    }

    /// The backward path of a cycle.
    pub fn reversed(&self) -> TranslationPath {
        TranslationPath {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

impl fmt::Display for TranslationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

/// Encoder/decoder/discriminator ids backing one translation path.
///
/// The encoder belongs to the source domain, the decoder to the target
/// domain, and the discriminator judges realness of target-domain images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorParts {
    pub encoder: String,
    pub decoder: String,
    pub discriminator: String,
}

/// Immutable set of kernel domains, ordered lexicographically by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainRegistry {
    domains: Vec<KernelDomain>,
}

impl DomainRegistry {
    /// Builds a registry, sorting domains by id and rejecting duplicates.
    pub fn new(mut domains: Vec<KernelDomain>) -> Result<Self> {
        domains.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in domains.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Config(format!(
                    "duplicate domain id `{}` in registry",
                    pair[0].id
                )));
            }
        }
        if domains.iter().any(|d| d.id.is_empty()) {
            return Err(Error::Config("domain id must be non-empty".into()));
        }
        Ok(DomainRegistry { domains })
    }

    /// The four study domains: Siemens B50f/B30f and GE BONE/STD.
    pub fn paper_default() -> Self {
        DomainRegistry::new(vec![
            KernelDomain::new("siemens_b50f", Vendor::Siemens, "B50f", Hardness::Hard),
            KernelDomain::new("siemens_b30f", Vendor::Siemens, "B30f", Hardness::Soft),
            KernelDomain::new("ge_bone", Vendor::Ge, "BONE", Hardness::Hard),
            KernelDomain::new("ge_std", Vendor::Ge, "STD", Hardness::Soft),
        ])
        .expect("default registry is valid")
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[KernelDomain] {
        &self.domains
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(|d| d.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.domains.iter().any(|d| d.id == id)
    }

    pub fn get(&self, id: &str) -> Result<&KernelDomain> {
        self.domains
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| Error::UnknownDomain(id.to_string()))
    }

    fn require_pairable(&self) -> Result<()> {
        if self.domains.len() < 2 {
            return Err(Error::Config(format!(
                "harmonization needs at least 2 domains, registry has {}",
                self.domains.len()
            )));
        }
        Ok(())
    }

    /// All unordered domain pairs, lexicographic by id: n domains give
    /// n(n-1)/2 directions.
    pub fn enumerate_directions(&self) -> Result<Vec<(String, String)>> {
        self.require_pairable()?;
        let mut out = Vec::with_capacity(self.domains.len() * (self.domains.len() - 1) / 2);
        for i in 0..self.domains.len() {
            for j in (i + 1)..self.domains.len() {
                out.push((self.domains[i].id.clone(), self.domains[j].id.clone()));
            }
        }
        Ok(out)
    }

    /// All ordered translation paths: both orderings of every direction,
    /// lexicographic by (source, target).
    pub fn enumerate_paths(&self) -> Result<Vec<TranslationPath>> {
        self.require_pairable()?;
        let mut out = Vec::with_capacity(self.domains.len() * (self.domains.len() - 1));
        for src in &self.domains {
            for tgt in &self.domains {
                if src.id != tgt.id {
                    out.push(TranslationPath {
                        source: src.id.clone(),
                        target: tgt.id.clone(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Resolves a path to the encoder/decoder/discriminator ids that realize
    /// it. Pure function of the path; both endpoints must be registered.
    pub fn resolve_generator(&self, path: &TranslationPath) -> Result<GeneratorParts> {
        self.get(&path.source)?;
        self.get(&path.target)?;
        Ok(GeneratorParts {
            encoder: path.source.clone(),
            decoder: path.target.clone(),
            discriminator: path.target.clone(),
        })
    }
}
