//! Unpaired harmonization of CT reconstruction kernels across vendors.
//!
//! The library trains a multipath cycle GAN over four kernel domains
//! (two vendors, hard and soft kernels each), harmonizes CT volumes
//! slice-by-slice between any pair of domains, and evaluates the effect on
//! emphysema quantification with a covariate linear model and ANOVA.
//!
//! Modules follow the pipeline order:
//!
//! - [`domains`] — kernel domain registry and translation path enumeration
//! - [`nifti`] — minimal NIfTI-1 volume reader/writer
//! - [`volume`] — HU clipping/normalization, slice extraction, augmentation
//! - [`phantom`] — synthetic kernel-style dataset generator for desk-scale runs
//! - [`nn`] — small deterministic f64 conv-net engine (forward + backward)
//! - [`networks`] — shared-latent encoders/decoders and patch discriminators
//! - [`losses`] — least-squares adversarial and L1 cycle losses (12 paths)
//! - [`trainer`] — simultaneous multipath training loop with checkpointing
//! - [`harmonizer`] — volume-level inference
//! - [`quantify`] — emphysema scoring (percent lung voxels below -950 HU)
//! - [`stats`] — covariate regression and per-covariate F tests

pub mod checkpoint;
pub mod domains;
pub mod error;
pub mod harmonizer;
pub mod losses;
pub mod networks;
pub mod nifti;
pub mod nn;
pub mod phantom;
pub mod quantify;
pub mod stats;
pub mod trainer;
pub mod volume;

pub use domains::{DomainRegistry, Hardness, KernelDomain, TranslationPath, Vendor};
pub use error::{Error, Result};
pub use networks::{ArchConfig, LatentCode, ModelBundle};
pub use quantify::{EmphysemaRecord, LungMask};
pub use stats::RegressionResult;
pub use volume::{NormalizationSpec, TrainingSlice, Volume};
