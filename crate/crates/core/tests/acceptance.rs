//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Oracles (voxel counting, normal equations,
//! incomplete beta, finite differences) are implemented locally in this file
//! and stay independent of the library code paths they check.

use ndarray::{Array2, Array3, Array4};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

use kernel_harmony::domains::{DomainRegistry, TranslationPath};
use kernel_harmony::losses::{assemble_step_losses, LossConfig};
use kernel_harmony::networks::{ArchConfig, ModelBundle};
use kernel_harmony::quantify::{emphysema_score, EmphysemaRecord, LungMask, MaskProvenance};
use kernel_harmony::stats::fit_linear_model;
use kernel_harmony::trainer::{learning_rate, train, TrainConfig, Trainer, TrainOptions};
use kernel_harmony::volume::{NormalizationSpec, Volume};

fn seeded(seed: u64, tag: &str) -> ChaCha20Rng {
    kernel_harmony::nn::derive_rng(seed, tag)
}

fn tiny_arch(input_size: usize, depth: usize) -> ArchConfig {
    ArchConfig {
        input_size,
        input_channels: 1,
        depth,
        base_channels: 2,
        max_channels: 4,
        disc_base_channels: 2,
        init_std: 0.1,
    }
}

fn random_batches(
    registry: &DomainRegistry,
    arch: &ArchConfig,
    n: usize,
    seed: u64,
) -> BTreeMap<String, Array4<f64>> {
    let mut rng = seeded(seed, "acceptance-batches");
    registry
        .ids()
        .map(|id| {
            (
                id.to_string(),
                Array4::from_shape_fn((n, 1, arch.input_size, arch.input_size), |_| {
                    rng.gen_range(-1.0..1.0)
                }),
            )
        })
        .collect()
}

/// Criterion 1 — cardinality: 6 directions, 12 ordered paths, and one loss
/// assembly yields exactly 12 finite terms per loss family.
#[test]
fn criterion_1_cardinality() {
    let registry = DomainRegistry::paper_default();
    let directions = registry.enumerate_directions().unwrap();
    assert_eq!(directions.len(), 6, "expected 6 harmonization directions");
    let paths = registry.enumerate_paths().unwrap();
    assert_eq!(paths.len(), 12, "expected 12 ordered translation paths");

    let arch = tiny_arch(16, 3);
    let bundle = ModelBundle::new(arch, registry.clone(), 11).unwrap();
    let batches = random_batches(&registry, &arch, 2, 12);
    let losses = assemble_step_losses(&bundle, &batches, &LossConfig::default()).unwrap();
    assert_eq!(losses.adversarial.len(), 12);
    assert_eq!(losses.cycle.len(), 12);
    assert_eq!(losses.discriminator.len(), 12);
    losses.check_finite().unwrap();
    println!(
        "[PASS] criterion 1: 6 directions, 12 paths, 12+12+12 finite loss terms per step"
    );
}

/// Criterion 2 — latent contract: with the reference architecture a
/// 512x512 slice encodes to (512, 1, 1) features, and that latent decodes
/// through each of the three non-source decoders for all 12 paths.
#[test]
fn criterion_2_latent_contract() {
    use rayon::prelude::*;
    let start = std::time::Instant::now();
    let arch = ArchConfig::default();
    assert_eq!((arch.input_size, arch.depth), (512, 9));
    let registry = DomainRegistry::paper_default();
    let bundle = ModelBundle::new(arch, registry.clone(), 21).unwrap();

    let mut rng = seeded(22, "latent-contract");
    let slice = Array4::from_shape_fn((1, 1, 512, 512), |_| rng.gen_range(-1.0..1.0));

    // One latent per source domain, checked against the reference shape.
    let ids: Vec<String> = registry.ids().map(str::to_string).collect();
    let codes: Vec<(String, kernel_harmony::LatentCode)> = ids
        .par_iter()
        .map(|id| (id.clone(), bundle.encode(id, &slice).unwrap()))
        .collect();
    for (id, code) in &codes {
        assert_eq!(
            code.features.dim(),
            (1, 512, 1, 1),
            "latent of encoder `{id}` is not (512, 1, 1)"
        );
        assert_eq!(code.skips.len(), 8, "expected 8 skip features");
    }

    // Every latent decodes through every non-source decoder: 12 paths.
    let paths = registry.enumerate_paths().unwrap();
    assert_eq!(paths.len(), 12);
    let results: Vec<(String, (usize, usize, usize, usize))> = paths
        .par_iter()
        .map(|path| {
            let code = &codes.iter().find(|(id, _)| id == &path.source).unwrap().1;
            let out = bundle.decode(&path.target, code).unwrap();
            (path.to_string(), out.dim())
        })
        .collect();
    for (path, dim) in &results {
        assert_eq!(*dim, (1, 1, 512, 512), "decode along {path} has wrong shape");
    }
    println!(
        "[PASS] criterion 2: latent (512,1,1) decodes through all 12 paths (elapsed {:.1?})",
        start.elapsed()
    );
}

/// Criterion 3a — normalization round trip within 1e-3 HU over 1e6 values.
#[test]
fn criterion_3a_normalization_round_trip() {
    let spec = NormalizationSpec::default();
    let mut rng = seeded(31, "round-trip");
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let hu: f64 = rng.gen_range(-3000.0..5000.0);
        let clipped = hu.clamp(spec.hu_min as f64, spec.hu_max as f64);
        let rt = spec.denormalize(spec.normalize(hu));
        worst = worst.max((rt - clipped).abs());
    }
    assert!(worst <= 1e-3, "worst round-trip error {worst} HU");
    println!("[PASS] criterion 3a: normalization round trip worst error {worst:.2e} HU <= 1e-3");
}

/// Criterion 3b — finite-difference gradient check on the depth-2 / 8x8
/// configuration: analytic gradients of the generator objective and of the
/// discriminator loss match central differences within 1e-3 relative error.
#[test]
fn criterion_3b_gradient_check() {
    let registry = DomainRegistry::paper_default();
    let arch = tiny_arch(8, 2);
    let loss_cfg = LossConfig::default();
    let train_cfg = TrainConfig { batch_size: 2, seed: 33, ..TrainConfig::default() };
    let batches = random_batches(&registry, &arch, 2, 34);

    // Analytic gradients: one step at lr 0 leaves parameters untouched but
    // fills the gradient buffers of both groups.
    let bundle = ModelBundle::new(arch, registry.clone(), 35).unwrap();
    let mut trainer = Trainer::new(bundle, train_cfg, loss_cfg).unwrap();
    trainer.train_step(&batches, 0.0).unwrap();

    let gen_objective = |bundle: &ModelBundle| -> f64 {
        let losses = assemble_step_losses(bundle, &batches, &loss_cfg).unwrap();
        losses
            .adversarial
            .values()
            .map(|a| loss_cfg.lambda_adversarial * a)
            .sum::<f64>()
            + losses.cycle.values().sum::<f64>()
    };
    let disc_objective = |bundle: &ModelBundle| -> f64 {
        let losses = assemble_step_losses(bundle, &batches, &loss_cfg).unwrap();
        losses.discriminator.values().sum::<f64>()
    };

    let eps = 1e-7;
    let rel = |analytic: f64, numeric: f64| -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
    };

    // Generator parameters against the generator objective.
    let analytic: Vec<f64> = trainer
        .bundle
        .generator_params()
        .iter()
        .flat_map(|p| p.grad.iter().copied())
        .collect();
    let mut worst_gen = 0.0f64;
    let n_gen = analytic.len();
    for flat in 0..n_gen {
        let mut plus = trainer.bundle.clone();
        let mut minus = trainer.bundle.clone();
        perturb_flat(plus.generator_params_mut(), flat, eps);
        perturb_flat(minus.generator_params_mut(), flat, -eps);
        let numeric = (gen_objective(&plus) - gen_objective(&minus)) / (2.0 * eps);
        worst_gen = worst_gen.max(rel(analytic[flat], numeric));
    }
    assert!(
        worst_gen < 1e-3,
        "generator gradient mismatch: worst relative error {worst_gen}"
    );

    // Discriminator parameters against the summed discriminator loss.
    let analytic: Vec<f64> = trainer
        .bundle
        .discriminator_params()
        .iter()
        .flat_map(|p| p.grad.iter().copied())
        .collect();
    let mut worst_disc = 0.0f64;
    let n_disc = analytic.len();
    for flat in 0..n_disc {
        let mut plus = trainer.bundle.clone();
        let mut minus = trainer.bundle.clone();
        perturb_flat(plus.discriminator_params_mut(), flat, eps);
        perturb_flat(minus.discriminator_params_mut(), flat, -eps);
        let numeric = (disc_objective(&plus) - disc_objective(&minus)) / (2.0 * eps);
        worst_disc = worst_disc.max(rel(analytic[flat], numeric));
    }
    assert!(
        worst_disc < 1e-3,
        "discriminator gradient mismatch: worst relative error {worst_disc}"
    );
    println!(
        "[PASS] criterion 3b: gradient check over {n_gen} generator + {n_disc} discriminator \
         parameters, worst relative error {:.2e} < 1e-3",
        worst_gen.max(worst_disc)
    );
}

fn perturb_flat(params: Vec<&mut kernel_harmony::nn::Param>, flat: usize, delta: f64) {
    let mut seen = 0usize;
    for p in params {
        if flat < seen + p.len() {
            p.value.as_slice_mut().unwrap()[flat - seen] += delta;
            return;
        }
        seen += p.len();
    }
    panic!("flat parameter index {flat} out of range");
}

/// Criterion 3c — LSGAN and cycle hand values exact to 1e-7.
#[test]
fn criterion_3c_loss_hand_values() {
    use kernel_harmony::losses::{cycle_loss, disc_loss, gen_adversarial_loss};
    let cfg = LossConfig::default();
    let map = |v: f64| Array4::from_elem((1, 1, 4, 4), v);

    let quarter = gen_adversarial_loss(&map(0.5), &cfg).unwrap();
    assert!((quarter - 0.25).abs() < 1e-7);
    let one = disc_loss(&map(0.0), &map(1.0), &cfg).unwrap();
    assert!((one - 1.0).abs() < 1e-7);
    let disc_quarter = disc_loss(&map(0.5), &map(0.5), &cfg).unwrap();
    assert!((disc_quarter - 0.25).abs() < 1e-7);

    let base = map(0.2);
    let shifted = map(0.3);
    let cyc_one = cycle_loss(&base, &shifted, &cfg).unwrap();
    assert!((cyc_one - 1.0).abs() < 1e-7, "10 * 0.1 = {cyc_one}");
    let cyc_twenty = cycle_loss(&map(-1.0), &map(1.0), &cfg).unwrap();
    assert!((cyc_twenty - 20.0).abs() < 1e-7, "10 * 2 = {cyc_twenty}");
    println!("[PASS] criterion 3c: LSGAN/cycle hand values 0.25, 1.0, 0.25, 1.0, 20.0 exact to 1e-7");
}

/// Criterion 4 — learning-rate schedule anchor points and monotonicity.
#[test]
fn criterion_4_schedule() {
    let cfg = TrainConfig::default();
    for epoch in 0..=14 {
        assert_eq!(learning_rate(epoch, &cfg).unwrap(), 2e-4, "epoch {epoch}");
    }
    let mid = learning_rate(22, &cfg).unwrap();
    assert!((mid - 1e-4).abs() < 1e-18, "epoch 22 gave {mid}");
    assert_eq!(learning_rate(30, &cfg).unwrap(), 0.0);
    let mut prev = f64::INFINITY;
    for epoch in 0..=30 {
        let lr = learning_rate(epoch, &cfg).unwrap();
        assert!(lr <= prev, "schedule increased at epoch {epoch}");
        prev = lr;
    }
    println!("[PASS] criterion 4: lr 2e-4 through epoch 14, 1e-4 at 22, 0 at 30, nonincreasing");
}

/// Criterion 5 — oracle equivalence: emphysema scoring vs brute-force voxel
/// counts (exact), OLS vs normal equations (1e-8), F p-values vs an
/// independent incomplete-beta evaluation (1e-6).
#[test]
fn criterion_5_oracles() {
    // Emphysema scoring on 100 random volume/mask pairs.
    let mut rng = seeded(51, "emphysema-oracle");
    let mut checked = 0usize;
    while checked < 100 {
        let dim = (
            rng.gen_range(3..10usize),
            rng.gen_range(3..10usize),
            rng.gen_range(1..5usize),
        );
        let voxels = Array3::from_shape_fn(dim, |_| rng.gen_range(-1100.0f32..-700.0));
        let mask_vox = Array3::from_shape_fn(dim, |_| rng.gen_bool(0.6));
        if !mask_vox.iter().any(|&m| m) {
            continue;
        }
        // Brute-force per-voxel count.
        let mut below = 0usize;
        let mut total = 0usize;
        for x in 0..dim.0 {
            for y in 0..dim.1 {
                for z in 0..dim.2 {
                    if mask_vox[[x, y, z]] {
                        total += 1;
                        if voxels[[x, y, z]] < -950.0 {
                            below += 1;
                        }
                    }
                }
            }
        }
        let oracle = 100.0 * below as f64 / total as f64;
        let volume = Volume {
            voxels,
            spacing: [1.0; 3],
            affine: [[0.0; 4]; 4],
            source_path: String::new(),
            warnings: vec![],
        };
        let mask = LungMask { voxels: mask_vox, provenance: MaskProvenance::External };
        let score = emphysema_score(&volume, &mask).unwrap();
        assert_eq!(score, oracle, "score differs from brute-force count");
        checked += 1;
    }

    // OLS vs normal equations on 50 seeded problems.
    let mut worst_beta = 0.0f64;
    for problem in 0..50u64 {
        let records = synthetic_cohort(120, 510 + problem, |r, rng| {
            2.0 + 0.2 * r.age - 1.0 * r.sex as f64 + 0.5 * r.smoking as f64
                + 3.0 * r.vendor as f64
                + rng.gen_range(-2.0..2.0)
        });
        let fit = fit_linear_model(&records).unwrap();
        let oracle = normal_equations(&records);
        for i in 0..5 {
            worst_beta = worst_beta.max((fit.beta[i] - oracle[i]).abs());
        }
    }
    assert!(worst_beta < 1e-8, "OLS vs normal equations worst gap {worst_beta}");

    // F-test p-values vs the independent incomplete-beta oracle.
    let records = synthetic_cohort(60, 560, |r, rng| {
        1.0 + 0.3 * r.age + 2.0 * r.vendor as f64 + rng.gen_range(-3.0..3.0)
    });
    let fit = fit_linear_model(&records).unwrap();
    let mut worst_p = 0.0f64;
    for row in &fit.anova {
        let oracle = f_survival_oracle(row.f_statistic, 1.0, (fit.n - 5) as f64);
        worst_p = worst_p.max((row.p_value - oracle).abs());
    }
    assert!(worst_p < 1e-6, "p-value vs incomplete-beta oracle worst gap {worst_p}");
    println!(
        "[PASS] criterion 5: scoring exact on 100 pairs; OLS within {worst_beta:.1e} of normal \
         equations over 50 problems; p-values within {worst_p:.1e} of the beta oracle"
    );
}

/// Criterion 7 — statistics pipeline: an injected vendor offset that
/// harmonization removes flips the vendor p-value from significant to
/// non-significant while an injected age effect stays significant.
#[test]
fn criterion_7_stats_pipeline() {
    let mut rng = seeded(71, "stats-pipeline");
    let n = 240;
    let mut before = Vec::with_capacity(n);
    for i in 0..n {
        let age = rng.gen_range(55..=74) as f64;
        let sex = u8::from(rng.gen_bool(0.5));
        let smoking = u8::from(rng.gen_bool(0.5));
        let vendor = (i % 2) as u8;
        let truth = rng.gen_range(2.0..20.0);
        // Age effect and vendor offset, plus measurement noise.
        let score = truth + 0.35 * (age - 65.0) + 5.0 * vendor as f64 + rng.gen_range(-2.0..2.0);
        before.push(EmphysemaRecord {
            subject_id: format!("s{i:04}"),
            score,
            kernel: if vendor == 0 { "siemens_b50f" } else { "ge_bone" }.into(),
            age,
            sex,
            smoking,
            vendor,
            mask_provenance: MaskProvenance::External,
        });
    }
    // Harmonization removes the vendor offset; everything else stays.
    let after: Vec<EmphysemaRecord> = before
        .iter()
        .map(|r| EmphysemaRecord { score: r.score - 5.0 * r.vendor as f64, ..r.clone() })
        .collect();

    let fit_before = fit_linear_model(&before).unwrap();
    let fit_after = fit_linear_model(&after).unwrap();
    let vendor_before = fit_before.anova_row("vendor").unwrap().p_value;
    let vendor_after = fit_after.anova_row("vendor").unwrap().p_value;
    let age_before = fit_before.anova_row("age").unwrap().p_value;
    let age_after = fit_after.anova_row("age").unwrap().p_value;
    assert!(vendor_before < 0.05, "vendor before: p = {vendor_before}");
    assert!(vendor_after > 0.05, "vendor after: p = {vendor_after}");
    assert!(age_before < 0.05, "age before: p = {age_before}");
    assert!(age_after < 0.05, "age after: p = {age_after}");
    println!(
        "[PASS] criterion 7: vendor p {vendor_before:.3e} -> {vendor_after:.3} crosses 0.05; \
         age p stays significant ({age_before:.3e}, {age_after:.3e})"
    );
}

/// Criterion 8 — determinism and persistence: equal seeds give bit-identical
/// checkpoints after 2 epochs across two runs, and a save/load round trip
/// reproduces the next step's losses exactly.
#[test]
fn criterion_8_determinism_and_persistence() {
    let registry = DomainRegistry::paper_default();
    let arch = tiny_arch(16, 3);
    let train_cfg = TrainConfig {
        epochs_total: 2,
        epochs_constant: 1,
        batch_size: 2,
        lr0: 1e-4,
        seed: 81,
        checkpoint_every: 1,
        ..TrainConfig::default()
    };
    let mut datasets = BTreeMap::new();
    let mut rng = seeded(82, "determinism-data");
    for id in registry.ids() {
        let slices: Vec<Array2<f64>> = (0..5)
            .map(|_| Array2::from_shape_fn((16, 16), |_| rng.gen_range(-1.0..1.0)))
            .collect();
        datasets.insert(id.to_string(), slices);
    }
    let opts = TrainOptions::new(arch, train_cfg, LossConfig::default(), registry.clone());

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let report_a = train(&opts, &datasets, dir_a.path()).unwrap();
    let report_b = train(&opts, &datasets, dir_b.path()).unwrap();
    let bytes_a = std::fs::read(&report_a.checkpoint_path).unwrap();
    let bytes_b = std::fs::read(&report_b.checkpoint_path).unwrap();
    assert_eq!(bytes_a, bytes_b, "checkpoints differ across identical runs");

    // Save -> load -> save byte equality.
    let (bundle, state) = kernel_harmony::checkpoint::load_checkpoint(&report_a.checkpoint_path).unwrap();
    let resaved = dir_a.path().join("resaved.ckpt");
    kernel_harmony::checkpoint::save_checkpoint(&resaved, &bundle, state.as_ref()).unwrap();
    assert_eq!(bytes_a, std::fs::read(&resaved).unwrap(), "save/load/save not byte-stable");

    // Next-step losses are identical when resumed twice from the same file.
    let batches = random_batches(&registry, &arch, 2, 83);
    let mut t1 = Trainer::resume(&report_a.checkpoint_path).unwrap();
    let mut t2 = Trainer::resume(&report_a.checkpoint_path).unwrap();
    let l1 = t1.train_step(&batches, 1e-4).unwrap();
    let l2 = t2.train_step(&batches, 1e-4).unwrap();
    assert_eq!(l1, l2, "next-step losses differ after checkpoint round trip");
    println!(
        "[PASS] criterion 8: bit-identical 2-epoch checkpoints across runs; save/load round \
         trip reproduces next-step losses exactly"
    );
}

// ---------------------------------------------------------------------------
// Local oracles.

fn synthetic_cohort(
    n: usize,
    seed: u64,
    mut score: impl FnMut(&EmphysemaRecord, &mut ChaCha20Rng) -> f64,
) -> Vec<EmphysemaRecord> {
    let mut rng = seeded(seed, "cohort");
    (0..n)
        .map(|i| {
            let mut record = EmphysemaRecord {
                subject_id: format!("s{i:04}"),
                score: 0.0,
                kernel: String::new(),
                age: rng.gen_range(55..=74) as f64,
                sex: u8::from(rng.gen_bool(0.5)),
                smoking: u8::from(rng.gen_bool(0.5)),
                vendor: u8::from(rng.gen_bool(0.5)),
                mask_provenance: MaskProvenance::External,
            };
            record.score = score(&record, &mut rng);
            record
        })
        .collect()
}

/// Normal-equations OLS via Gaussian elimination with partial pivoting.
fn normal_equations(records: &[EmphysemaRecord]) -> [f64; 5] {
    let mut xtx = [[0.0f64; 5]; 5];
    let mut xty = [0.0f64; 5];
    for r in records {
        let row = [1.0, r.age, r.sex as f64, r.smoking as f64, r.vendor as f64];
        for i in 0..5 {
            for j in 0..5 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * r.score;
        }
    }
    for col in 0..5 {
        let pivot = (col..5)
            .max_by(|&i, &j| xtx[i][col].abs().partial_cmp(&xtx[j][col].abs()).unwrap())
            .unwrap();
        xtx.swap(col, pivot);
        xty.swap(col, pivot);
        for row in (col + 1)..5 {
            let factor = xtx[row][col] / xtx[col][col];
            for k in col..5 {
                xtx[row][k] -= factor * xtx[col][k];
            }
            xty[row] -= factor * xty[col];
        }
    }
    let mut beta = [0.0f64; 5];
    for row in (0..5).rev() {
        let mut acc = xty[row];
        for k in (row + 1)..5 {
            acc -= xtx[row][k] * beta[k];
        }
        beta[row] = acc / xtx[row][row];
    }
    beta
}

/// Independent F survival via a Lentz continued-fraction incomplete beta.
fn f_survival_oracle(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let x = d1 * f / (d1 * f + d2);
    1.0 - beta_reg_oracle(d1 / 2.0, d2 / 2.0, x)
}

fn beta_reg_oracle(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-14 {
            break;
        }
    }
    h
}

fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}
