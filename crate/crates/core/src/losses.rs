//! Least-squares adversarial losses and the weighted L1 cycle loss.
//!
//! Twelve of each are assembled per training step — one adversarial, one
//! cycle and one discriminator term per ordered translation path. Mirroring
//! the cited cycle-GAN convention, the weight lambda rides on the cycle
//! term by default (`lambda_cycle = 10`) with the adversarial weight at 1;
//! `lambda_adversarial` exists so the alternative weighting is a config
//! change.

use ndarray::Array4;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::domains::{DomainRegistry, TranslationPath};
use crate::error::{Error, Result};
use crate::networks::ModelBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the L1 cycle-consistency term.
    pub lambda_cycle: f64,
    /// Weight of the generator adversarial term.
    pub lambda_adversarial: f64,
    /// Regression target for real patches.
    pub real_label: f64,
    /// Regression target for synthetic patches.
    pub fake_label: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_cycle: 10.0,
            lambda_adversarial: 1.0,
            real_label: 1.0,
            fake_label: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_cycle > 0.0) || !self.lambda_adversarial.is_finite() {
            return Err(Error::Config(format!(
                "loss config requires lambda_cycle > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// The 12+12+12 per-path loss values of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLosses {
    pub adversarial: BTreeMap<TranslationPath, f64>,
    pub cycle: BTreeMap<TranslationPath, f64>,
    pub discriminator: BTreeMap<TranslationPath, f64>,
}

impl StepLosses {
    /// Errors on the first non-finite entry, naming its path.
    pub fn check_finite(&self) -> Result<()> {
        for (name, map) in [
            ("adversarial loss", &self.adversarial),
            ("cycle loss", &self.cycle),
            ("discriminator loss", &self.discriminator),
        ] {
            for (path, value) in map {
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        quantity: name.to_string(),
                        path: path.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn means(&self) -> (f64, f64, f64) {
        let mean = |m: &BTreeMap<TranslationPath, f64>| {
            if m.is_empty() {
                0.0
            } else {
                m.values().sum::<f64>() / m.len() as f64
            }
        };
        (mean(&self.adversarial), mean(&self.cycle), mean(&self.discriminator))
    }
}

/// Generator-side LSGAN loss: mean squared distance of the fake scores from
/// the real label.
pub fn gen_adversarial_loss(fake_scores: &Array4<f64>, cfg: &LossConfig) -> Result<f64> {
    if fake_scores.is_empty() {
        return Err(Error::Shape("empty score map".into()));
    }
    let n = fake_scores.len() as f64;
    Ok(fake_scores.mapv(|s| (s - cfg.real_label).powi(2)).sum() / n)
}

/// Discriminator LSGAN loss, halved per convention:
/// (mean (real - 1)^2 + mean fake^2) / 2.
pub fn disc_loss(real_scores: &Array4<f64>, fake_scores: &Array4<f64>, cfg: &LossConfig) -> Result<f64> {
    if real_scores.dim() != fake_scores.dim() {
        return Err(Error::Shape(format!(
            "score maps differ: {:?} vs {:?}",
            real_scores.dim(),
            fake_scores.dim()
        )));
    }
    if real_scores.is_empty() {
        return Err(Error::Shape("empty score map".into()));
    }
    let n = real_scores.len() as f64;
    let real = real_scores.mapv(|s| (s - cfg.real_label).powi(2)).sum() / n;
    let fake = fake_scores.mapv(|s| (s - cfg.fake_label).powi(2)).sum() / n;
    Ok(0.5 * (real + fake))
}

/// Weighted L1 cycle-consistency loss: lambda_cycle * mean |a - b|.
pub fn cycle_loss(original: &Array4<f64>, reconstructed: &Array4<f64>, cfg: &LossConfig) -> Result<f64> {
    if original.dim() != reconstructed.dim() {
        return Err(Error::Shape(format!(
            "cycle pair differs: {:?} vs {:?}",
            original.dim(),
            reconstructed.dim()
        )));
    }
    if original.is_empty() {
        return Err(Error::Shape("empty cycle pair".into()));
    }
    let n = original.len() as f64;
    let l1 = ndarray::Zip::from(original)
        .and(reconstructed)
        .fold(0.0, |acc, a, b| acc + (a - b).abs());
    Ok(cfg.lambda_cycle * l1 / n)
}

/// Assembles the per-path loss maps for one step from caller-provided
/// translate/discriminate functions. `translate(path, x)` produces the
/// synthetic batch for a path; `discriminate(domain, x)` scores a batch
/// against a domain. The discriminator term uses the fake batch as data
/// (no generator gradient flows through it by construction here — these are
/// pure evaluations).
pub fn assemble_step_losses_with<T, D>(
    registry: &DomainRegistry,
    batches: &BTreeMap<String, Array4<f64>>,
    cfg: &LossConfig,
    mut translate: T,
    mut discriminate: D,
) -> Result<StepLosses>
where
    T: FnMut(&TranslationPath, &Array4<f64>) -> Result<Array4<f64>>,
    D: FnMut(&str, &Array4<f64>) -> Result<Array4<f64>>,
{
    cfg.validate()?;
    for id in registry.ids() {
        if !batches.contains_key(id) {
            return Err(Error::Config(format!("missing batch for domain `{id}`")));
        }
    }
    let mut losses = StepLosses {
        adversarial: BTreeMap::new(),
        cycle: BTreeMap::new(),
        discriminator: BTreeMap::new(),
    };
    for path in registry.enumerate_paths()? {
        let x_src = &batches[&path.source];
        let x_tgt = &batches[&path.target];
        let fake = translate(&path, x_src)?;
        let fake_scores = discriminate(&path.target, &fake)?;
        losses
            .adversarial
            .insert(path.clone(), gen_adversarial_loss(&fake_scores, cfg)?);
        let reconstructed = translate(&path.reversed(), &fake)?;
        losses
            .cycle
            .insert(path.clone(), cycle_loss(x_src, &reconstructed, cfg)?);
        let real_scores = discriminate(&path.target, x_tgt)?;
        losses
            .discriminator
            .insert(path.clone(), disc_loss(&real_scores, &fake_scores, cfg)?);
    }
    Ok(losses)
}

/// [`assemble_step_losses_with`] over a model bundle's networks.
pub fn assemble_step_losses(
    bundle: &ModelBundle,
    batches: &BTreeMap<String, Array4<f64>>,
    cfg: &LossConfig,
) -> Result<StepLosses> {
    assemble_step_losses_with(
        &bundle.registry.clone(),
        batches,
        cfg,
        |path, x| bundle.translate(path, x),
        |domain, x| bundle.discriminate(domain, x),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainRegistry;
    use ndarray::Array4;

    fn scores(v: f64) -> Array4<f64> {
        Array4::from_elem((2, 1, 3, 3), v)
    }

    #[test]
    fn generator_loss_hand_values() {
        let cfg = LossConfig::default();
        assert_eq!(gen_adversarial_loss(&scores(1.0), &cfg).unwrap(), 0.0);
        assert_eq!(gen_adversarial_loss(&scores(0.0), &cfg).unwrap(), 1.0);
        let quarter = gen_adversarial_loss(&scores(0.5), &cfg).unwrap();
        assert!((quarter - 0.25).abs() < 1e-7);
    }

    #[test]
    fn discriminator_loss_hand_values() {
        let cfg = LossConfig::default();
        assert_eq!(disc_loss(&scores(1.0), &scores(0.0), &cfg).unwrap(), 0.0);
        let swapped = disc_loss(&scores(0.0), &scores(1.0), &cfg).unwrap();
        assert!((swapped - 1.0).abs() < 1e-7);
        let half = disc_loss(&scores(0.5), &scores(0.5), &cfg).unwrap();
        assert!((half - 0.25).abs() < 1e-7);
    }

    #[test]
    fn cycle_loss_hand_values() {
        let cfg = LossConfig::default();
        let a = Array4::from_elem((1, 1, 4, 4), 0.3);
        assert_eq!(cycle_loss(&a, &a, &cfg).unwrap(), 0.0);

        let b = a.mapv(|v| v + 0.1);
        let gap = cycle_loss(&a, &b, &cfg).unwrap();
        assert!((gap - 1.0).abs() < 1e-7, "10 * 0.1 = 1, got {gap}");

        let lo = Array4::from_elem((1, 1, 4, 4), -1.0);
        let hi = Array4::from_elem((1, 1, 4, 4), 1.0);
        let max_gap = cycle_loss(&lo, &hi, &cfg).unwrap();
        assert!((max_gap - 20.0).abs() < 1e-7, "10 * 2 = 20, got {max_gap}");
    }

    #[test]
    fn cycle_loss_scales_linearly_in_lambda() {
        let a = Array4::from_shape_fn((1, 1, 5, 5), |(_, _, i, j)| (i as f64 - j as f64) / 5.0);
        let b = a.mapv(|v| -v);
        let base = LossConfig { lambda_cycle: 3.0, ..LossConfig::default() };
        let doubled = LossConfig { lambda_cycle: 6.0, ..LossConfig::default() };
        let l1 = cycle_loss(&a, &b, &base).unwrap();
        let l2 = cycle_loss(&a, &b, &doubled).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn losses_are_nonnegative() {
        let cfg = LossConfig::default();
        for v in [-2.0, -0.3, 0.0, 0.4, 1.7] {
            assert!(gen_adversarial_loss(&scores(v), &cfg).unwrap() >= 0.0);
            assert!(disc_loss(&scores(v), &scores(-v), &cfg).unwrap() >= 0.0);
        }
        let a = scores(0.2);
        let b = scores(-0.9);
        assert!(cycle_loss(&a, &b, &cfg).unwrap() >= 0.0);
    }

    #[test]
    fn empty_and_mismatched_maps_are_rejected() {
        let cfg = LossConfig::default();
        let empty = Array4::<f64>::zeros((0, 1, 1, 1));
        assert!(gen_adversarial_loss(&empty, &cfg).is_err());
        assert!(disc_loss(&scores(1.0), &Array4::zeros((1, 1, 3, 3)), &cfg).is_err());
        assert!(cycle_loss(&scores(0.1), &Array4::zeros((1, 1, 2, 2)), &cfg).is_err());
    }

    #[test]
    fn stub_assembly_yields_twelve_quarter_losses() {
        // Identity translate + constant-0.5 discriminator: every adversarial
        // and discriminator loss is 0.25, every cycle loss 0 (identity
        // generators are exact mutual inverses).
        let registry = DomainRegistry::paper_default();
        let mut batches = BTreeMap::new();
        for (i, id) in registry.ids().enumerate() {
            batches.insert(
                id.to_string(),
                Array4::from_elem((2, 1, 8, 8), -0.5 + 0.2 * i as f64),
            );
        }
        let cfg = LossConfig::default();
        let losses = assemble_step_losses_with(
            &registry,
            &batches,
            &cfg,
            |_path, x| Ok(x.clone()),
            |_domain, x| Ok(Array4::from_elem((x.dim().0, 1, 3, 3), 0.5)),
        )
        .unwrap();
        assert_eq!(losses.adversarial.len(), 12);
        assert_eq!(losses.cycle.len(), 12);
        assert_eq!(losses.discriminator.len(), 12);
        for v in losses.adversarial.values() {
            assert!((v - 0.25).abs() < 1e-12);
        }
        for v in losses.discriminator.values() {
            assert!((v - 0.25).abs() < 1e-12);
        }
        for v in losses.cycle.values() {
            assert_eq!(*v, 0.0);
        }
        losses.check_finite().unwrap();
    }

    #[test]
    fn missing_domain_batch_is_rejected() {
        let registry = DomainRegistry::paper_default();
        let mut batches = BTreeMap::new();
        batches.insert("ge_std".to_string(), scores(0.0));
        let err = assemble_step_losses_with(
            &registry,
            &batches,
            &LossConfig::default(),
            |_p, x| Ok(x.clone()),
            |_d, x| Ok(x.clone()),
        )
        .unwrap_err();
        assert!(err.to_string().contains("missing batch"), "{err}");
    }

    #[test]
    fn non_finite_losses_name_the_path() {
        let mut losses = StepLosses {
            adversarial: BTreeMap::new(),
            cycle: BTreeMap::new(),
            discriminator: BTreeMap::new(),
        };
        let path = TranslationPath::new("ge_bone", "ge_std").unwrap();
        losses.adversarial.insert(path.clone(), f64::NAN);
        let err = losses.check_finite().unwrap_err();
        assert!(err.to_string().contains("ge_bone->ge_std"), "{err}");
    }
}
