//! Criterion benchmarks for the pipeline's hot paths: slice translation,
//! training steps, emphysema scoring and the covariate fit.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::{Array2, Array3, Array4};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use kernel_harmony::domains::{DomainRegistry, TranslationPath};
use kernel_harmony::losses::LossConfig;
use kernel_harmony::networks::{ArchConfig, ModelBundle};
use kernel_harmony::quantify::{emphysema_score, EmphysemaRecord, LungMask, MaskProvenance};
use kernel_harmony::stats::fit_linear_model;
use kernel_harmony::trainer::{Trainer, TrainConfig};
use kernel_harmony::volume::{NormalizationSpec, Volume};

fn desk_arch() -> ArchConfig {
    ArchConfig {
        input_size: 128,
        input_channels: 1,
        depth: 6,
        base_channels: 4,
        max_channels: 32,
        disc_base_channels: 4,
        init_std: 0.02,
    }
}

fn rng(seed: u64) -> ChaCha20Rng {
    kernel_harmony::nn::derive_rng(seed, "bench")
}

fn bench_translate(c: &mut Criterion) {
    let bundle = ModelBundle::new(desk_arch(), DomainRegistry::paper_default(), 1).unwrap();
    let mut r = rng(2);
    let x = Array4::from_shape_fn((1, 1, 128, 128), |_| r.gen_range(-1.0..1.0));
    let path = TranslationPath::new("siemens_b50f", "siemens_b30f").unwrap();
    c.bench_function("translate_slice_128", |b| {
        b.iter(|| bundle.translate(&path, &x).unwrap())
    });
}

fn bench_train_step(c: &mut Criterion) {
    let registry = DomainRegistry::paper_default();
    let bundle = ModelBundle::new(desk_arch(), registry.clone(), 3).unwrap();
    let cfg = TrainConfig { batch_size: 2, ..TrainConfig::default() };
    let trainer = Trainer::new(bundle, cfg, LossConfig::default()).unwrap();
    let mut r = rng(4);
    let batches: std::collections::BTreeMap<String, Array4<f64>> = registry
        .ids()
        .map(|id| {
            (
                id.to_string(),
                Array4::from_shape_fn((2, 1, 128, 128), |_| r.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    c.bench_function("train_step_128_batch2", |b| {
        b.iter_batched(
            || trainer_clone(&trainer),
            |mut t| t.train_step(&batches, 2e-4).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn trainer_clone(t: &Trainer) -> Trainer {
    Trainer::new(t.bundle.clone(), t.train_cfg, t.loss_cfg).unwrap()
}

fn bench_emphysema(c: &mut Criterion) {
    let mut r = rng(5);
    let voxels = Array3::from_shape_fn((512, 512, 16), |_| r.gen_range(-1024.0f32..0.0));
    let volume = Volume {
        voxels,
        spacing: [1.0; 3],
        affine: [[0.0; 4]; 4],
        source_path: String::new(),
        warnings: vec![],
    };
    let mask = LungMask {
        voxels: Array3::from_shape_fn((512, 512, 16), |_| r.gen_bool(0.3)),
        provenance: MaskProvenance::External,
    };
    c.bench_function("emphysema_score_512x512x16", |b| {
        b.iter(|| emphysema_score(&volume, &mask).unwrap())
    });
}

fn bench_ols(c: &mut Criterion) {
    let mut r = rng(6);
    let records: Vec<EmphysemaRecord> = (0..500)
        .map(|i| EmphysemaRecord {
            subject_id: format!("s{i}"),
            score: r.gen_range(0.0..40.0),
            kernel: String::new(),
            age: r.gen_range(55..75) as f64,
            sex: r.gen_range(0..2) as u8,
            smoking: r.gen_range(0..2) as u8,
            vendor: r.gen_range(0..2) as u8,
            mask_provenance: MaskProvenance::External,
        })
        .collect();
    c.bench_function("fit_linear_model_n500", |b| {
        b.iter(|| fit_linear_model(&records).unwrap())
    });
}

fn bench_normalization(c: &mut Criterion) {
    let spec = NormalizationSpec::default();
    let mut r = rng(7);
    let values: Vec<f64> = (0..1_000_000).map(|_| r.gen_range(-2000.0..4000.0)).collect();
    c.bench_function("normalize_denormalize_1m", |b| {
        b.iter(|| {
            values
                .iter()
                .map(|&hu| spec.denormalize(spec.normalize(hu)))
                .sum::<f64>()
        })
    });
    let slice = Array2::from_shape_fn((512, 512), |_| r.gen_range(-1.0..1.0));
    c.bench_function("augment_resize_572_crop", |b| {
        let mut arng = rng(8);
        b.iter(|| {
            kernel_harmony::volume::augment_for_training(&slice, &spec, "d", &mut arng).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_translate, bench_train_step, bench_emphysema, bench_ols, bench_normalization
}
criterion_main!(benches);
