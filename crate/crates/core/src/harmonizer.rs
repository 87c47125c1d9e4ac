//! Volume-level inference: harmonize a CT volume from one kernel domain to
//! another, slice by slice.
//!
//! Inference is pure per slice (no augmentation, no cropping), so results
//! are independent of the slice batching used for throughput. Output
//! volumes keep the input geometry exactly and live in HU, clipped to the
//! normalization window.

use ndarray::{Array4, Axis};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::checkpoint::{checkpoint_sha256, load_checkpoint};
use crate::domains::TranslationPath;
use crate::error::{Error, Result};
use crate::networks::ModelBundle;
use crate::volume::{extract_axial_slices, NormalizationSpec, Volume};

/// Default number of axial slices pushed through the generator at once.
pub const DEFAULT_SLICE_BATCH: usize = 4;

/// Harmonizes every axial slice of `volume` along `path`. The output has
/// identical shape, spacing and affine, with values in the HU window.
pub fn harmonize_volume(
    bundle: &ModelBundle,
    volume: &Volume,
    path: &TranslationPath,
    spec: &NormalizationSpec,
    slice_batch: usize,
) -> Result<Volume> {
    if slice_batch == 0 {
        return Err(Error::Config("slice_batch must be positive".into()));
    }
    bundle.registry.resolve_generator(path)?;
    let size = bundle.arch.input_size;
    let slices = extract_axial_slices(volume, spec, (size, size), &path.source)?;

    let mut out = volume.clone();
    out.warnings.clear();
    let n = slices.len();
    let mut k = 0usize;
    while k < n {
        let count = slice_batch.min(n - k);
        let mut batch = Array4::<f64>::zeros((count, 1, size, size));
        for b in 0..count {
            batch
                .index_axis_mut(Axis(0), b)
                .index_axis_mut(Axis(0), 0)
                .assign(&slices[k + b].pixels);
        }
        let translated = bundle.translate(path, &batch)?;
        for b in 0..count {
            let plane = translated.index_axis(Axis(0), b);
            let plane = plane.index_axis(Axis(0), 0);
            let mut target = out.voxels.index_axis_mut(Axis(2), k + b);
            ndarray::Zip::from(&mut target).and(&plane).for_each(|t, &v| {
                *t = spec.denormalize(v) as f32;
            });
        }
        k += count;
    }
    out.voxels.mapv_inplace(|v| v.clamp(spec.hu_min, spec.hu_max));
    Ok(out)
}

/// One harmonization job: a volume and its translation path.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonizeEntry {
    pub volume_path: PathBuf,
    pub source_domain: String,
    pub target_domain: String,
}

/// Reads a harmonization manifest CSV with columns
/// `volume_path,source_domain,target_domain`.
pub fn read_harmonize_manifest(path: &Path) -> Result<Vec<HarmonizeEntry>> {
    #[derive(serde::Deserialize)]
    struct Row {
        volume_path: PathBuf,
        source_domain: String,
        target_domain: String,
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        let volume_path = if row.volume_path.is_relative() {
            dir.join(&row.volume_path)
        } else {
            row.volume_path
        };
        out.push(HarmonizeEntry {
            volume_path,
            source_domain: row.source_domain,
            target_domain: row.target_domain,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonizeSuccess {
    pub volume_path: PathBuf,
    pub output_path: PathBuf,
    pub source_domain: String,
    pub target_domain: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonizeFailure {
    pub volume_path: PathBuf,
    pub error: String,
}

/// Outcome of a batch run; failures never abort the remaining entries.
#[derive(Debug, Serialize)]
pub struct BatchReport {
    pub checkpoint: PathBuf,
    pub checkpoint_sha256: String,
    pub successes: Vec<HarmonizeSuccess>,
    pub failures: Vec<HarmonizeFailure>,
}

/// Provenance sidecar written next to every output volume.
#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    input: &'a Path,
    source_domain: &'a str,
    target_domain: &'a str,
    checkpoint: &'a Path,
    checkpoint_sha256: &'a str,
    tool_version: &'a str,
}

fn output_name(input: &Path, target: &str) -> String {
    let stem = input
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "volume".to_string());
    let stem = stem
        .strip_suffix(".nii.gz")
        .or_else(|| stem.strip_suffix(".nii"))
        .unwrap_or(&stem)
        .to_string();
    format!("{stem}_to_{target}.nii.gz")
}

/// Loads the checkpoint once and harmonizes every manifest entry,
/// writing each output volume with a JSON provenance sidecar plus a batch
/// report under `out_dir`.
pub fn batch_harmonize(
    checkpoint_path: &Path,
    entries: &[HarmonizeEntry],
    spec: &NormalizationSpec,
    out_dir: &Path,
    slice_batch: usize,
) -> Result<BatchReport> {
    use rayon::prelude::*;
    let (bundle, _) = load_checkpoint(checkpoint_path)?;
    let sha = checkpoint_sha256(checkpoint_path)?;
    std::fs::create_dir_all(out_dir)?;

    let results: Vec<std::result::Result<HarmonizeSuccess, HarmonizeFailure>> = entries
        .par_iter()
        .map(|entry| {
            harmonize_entry(&bundle, entry, spec, out_dir, slice_batch, checkpoint_path, &sha).map_err(
                |e| HarmonizeFailure {
                    volume_path: entry.volume_path.clone(),
                    error: e.to_string(),
                },
            )
        })
        .collect();

    let mut report = BatchReport {
        checkpoint: checkpoint_path.to_path_buf(),
        checkpoint_sha256: sha,
        successes: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok(s) => report.successes.push(s),
            Err(f) => report.failures.push(f),
        }
    }
    std::fs::write(
        out_dir.join("harmonize_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

fn harmonize_entry(
    bundle: &ModelBundle,
    entry: &HarmonizeEntry,
    spec: &NormalizationSpec,
    out_dir: &Path,
    slice_batch: usize,
    checkpoint_path: &Path,
    sha: &str,
) -> Result<HarmonizeSuccess> {
    let path = TranslationPath::new(&entry.source_domain, &entry.target_domain)?;
    let volume = crate::volume::load_volume(&entry.volume_path, spec)?;
    let harmonized = harmonize_volume(bundle, &volume, &path, spec, slice_batch)?;

    let out_path = out_dir.join(output_name(&entry.volume_path, &entry.target_domain));
    crate::volume::write_volume(&harmonized, spec, &out_path)?;
    let sidecar = Sidecar {
        input: &entry.volume_path,
        source_domain: &entry.source_domain,
        target_domain: &entry.target_domain,
        checkpoint: checkpoint_path,
        checkpoint_sha256: sha,
        tool_version: env!("CARGO_PKG_VERSION"),
    };
    let sidecar_path = out_path.with_extension("").with_extension("json");
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(HarmonizeSuccess {
        volume_path: entry.volume_path.clone(),
        output_path: out_path,
        source_domain: entry.source_domain.clone(),
        target_domain: entry.target_domain.clone(),
    })
}

/// Checkpoint summary for the `info` command.
#[derive(Debug, Serialize)]
pub struct CheckpointSummary {
    pub path: PathBuf,
    pub sha256: String,
    pub arch: crate::networks::ArchConfig,
    pub domains: Vec<String>,
    pub encoder_parameters: usize,
    pub decoder_parameters: usize,
    pub discriminator_parameters: usize,
    pub epoch_next: Option<u32>,
    pub seed: Option<u64>,
    pub has_optimizer_state: bool,
}

pub fn inspect_checkpoint(path: &Path) -> Result<CheckpointSummary> {
    let (bundle, state) = load_checkpoint(path)?;
    let count = |params: Vec<&crate::nn::Param>| params.iter().map(|p| p.len()).sum::<usize>();
    let first = bundle
        .registry
        .ids()
        .next()
        .map(str::to_string)
        .unwrap_or_default();
    Ok(CheckpointSummary {
        path: path.to_path_buf(),
        sha256: checkpoint_sha256(path)?,
        arch: bundle.arch,
        domains: bundle.registry.ids().map(str::to_string).collect(),
        encoder_parameters: count(bundle.encoders[&first].params()),
        decoder_parameters: count(bundle.decoders[&first].params()),
        discriminator_parameters: count(bundle.discriminators[&first].params()),
        epoch_next: state.as_ref().map(|s| s.epoch_next),
        seed: state.as_ref().map(|s| s.seed),
        has_optimizer_state: state.is_some(),
    })
}

/// Per-domain slice loader for training manifests: reads each listed volume
/// and extracts its normalized slices.
pub fn load_domain_slices(
    rows: &[(String, PathBuf)],
    spec: &NormalizationSpec,
    in_plane: usize,
) -> Result<BTreeMap<String, Vec<ndarray::Array2<f64>>>> {
    let mut out: BTreeMap<String, Vec<ndarray::Array2<f64>>> = BTreeMap::new();
    for (domain, path) in rows {
        let volume = crate::volume::load_volume(path, spec)?;
        let slices = extract_axial_slices(&volume, spec, (in_plane, in_plane), domain)?;
        out.entry(domain.clone())
            .or_default()
            .extend(slices.into_iter().map(|s| s.pixels));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::save_checkpoint;
    use crate::domains::DomainRegistry;
    use crate::networks::ArchConfig;
    use ndarray::Array3;
    use rand::Rng;

    fn tiny_bundle(seed: u64) -> ModelBundle {
        let arch = ArchConfig {
            input_size: 16,
            input_channels: 1,
            depth: 3,
            base_channels: 4,
            max_channels: 8,
            disc_base_channels: 4,
            init_std: 0.05,
        };
        ModelBundle::new(arch, DomainRegistry::paper_default(), seed).unwrap()
    }

    fn random_volume(nz: usize, seed: u64) -> Volume {
        let mut rng = crate::nn::derive_rng(seed, "harmonizer-test");
        let mut affine = [[0f32; 4]; 4];
        affine[0][0] = 0.7;
        affine[1][1] = 0.7;
        affine[2][2] = 1.25;
        affine[3][3] = 1.0;
        affine[0][3] = -100.0;
        Volume {
            voxels: Array3::from_shape_fn((16, 16, nz), |_| rng.gen_range(-1000.0f32..200.0)),
            spacing: [0.7, 0.7, 1.25],
            affine,
            source_path: "test".into(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn harmonized_volume_preserves_geometry_and_hu_range() {
        let bundle = tiny_bundle(1);
        let spec = NormalizationSpec::default();
        let volume = random_volume(5, 2);
        let path = TranslationPath::new("siemens_b50f", "siemens_b30f").unwrap();
        let out = harmonize_volume(&bundle, &volume, &path, &spec, 2).unwrap();
        assert_eq!(out.voxels.dim(), volume.voxels.dim());
        assert_eq!(out.spacing, volume.spacing);
        assert_eq!(out.affine, volume.affine);
        assert!(out
            .voxels
            .iter()
            .all(|&v| (spec.hu_min..=spec.hu_max).contains(&v)));
    }

    #[test]
    fn harmonization_is_deterministic() {
        let bundle = tiny_bundle(3);
        let spec = NormalizationSpec::default();
        let volume = random_volume(4, 4);
        let path = TranslationPath::new("ge_bone", "ge_std").unwrap();
        let a = harmonize_volume(&bundle, &volume, &path, &spec, 3).unwrap();
        let b = harmonize_volume(&bundle, &volume, &path, &spec, 3).unwrap();
        assert_eq!(a.voxels, b.voxels);
    }

    #[test]
    fn results_do_not_depend_on_slice_batching() {
        let bundle = tiny_bundle(5);
        let spec = NormalizationSpec::default();
        let volume = random_volume(7, 6);
        let path = TranslationPath::new("ge_std", "siemens_b30f").unwrap();
        let one = harmonize_volume(&bundle, &volume, &path, &spec, 1).unwrap();
        let three = harmonize_volume(&bundle, &volume, &path, &spec, 3).unwrap();
        let seven = harmonize_volume(&bundle, &volume, &path, &spec, 7).unwrap();
        assert_eq!(one.voxels, three.voxels);
        assert_eq!(one.voxels, seven.voxels);
    }

    #[test]
    fn unknown_domain_is_rejected() {
        let bundle = tiny_bundle(7);
        let spec = NormalizationSpec::default();
        let volume = random_volume(2, 8);
        let path = TranslationPath::new("ge_std", "toshiba_fc51").unwrap();
        assert!(harmonize_volume(&bundle, &volume, &path, &spec, 2).is_err());
    }

    #[test]
    fn batch_harmonize_isolates_failures_and_writes_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NormalizationSpec::default();
        let bundle = tiny_bundle(9);
        let ckpt = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &bundle, None).unwrap();

        // Three valid inputs and one missing file.
        let mut entries = Vec::new();
        for i in 0..3 {
            let vol = random_volume(3, 20 + i);
            let path = dir.path().join(format!("vol{i}.nii.gz"));
            crate::volume::write_volume(&vol, &spec, &path).unwrap();
            entries.push(HarmonizeEntry {
                volume_path: path,
                source_domain: "ge_bone".into(),
                target_domain: "siemens_b30f".into(),
            });
        }
        entries.push(HarmonizeEntry {
            volume_path: dir.path().join("missing.nii.gz"),
            source_domain: "ge_bone".into(),
            target_domain: "siemens_b30f".into(),
        });

        let out_dir = dir.path().join("out");
        let report = batch_harmonize(&ckpt, &entries, &spec, &out_dir, 2).unwrap();
        assert_eq!(report.successes.len(), 3);
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].volume_path.ends_with("missing.nii.gz"));
        assert!(!report.checkpoint_sha256.is_empty());
        for s in &report.successes {
            assert!(s.output_path.exists());
            let sidecar = s.output_path.with_extension("").with_extension("json");
            let text = std::fs::read_to_string(sidecar).unwrap();
            assert!(text.contains(&report.checkpoint_sha256));
        }
        assert!(out_dir.join("harmonize_report.json").exists());
    }

    #[test]
    fn empty_manifest_is_a_successful_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NormalizationSpec::default();
        let bundle = tiny_bundle(11);
        let ckpt = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &bundle, None).unwrap();
        let report = batch_harmonize(&ckpt, &[], &spec, &dir.path().join("out"), 2).unwrap();
        assert!(report.successes.is_empty() && report.failures.is_empty());
    }

    #[test]
    fn manifest_csv_parses_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("jobs.csv");
        std::fs::write(
            &manifest,
            "volume_path,source_domain,target_domain\nscans/a.nii.gz,ge_bone,siemens_b30f\n",
        )
        .unwrap();
        let entries = read_harmonize_manifest(&manifest).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].volume_path, dir.path().join("scans/a.nii.gz"));
    }

    #[test]
    fn checkpoint_summary_reports_structure() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = tiny_bundle(13);
        let ckpt = dir.path().join("m.ckpt");
        save_checkpoint(&ckpt, &bundle, None).unwrap();
        let info = inspect_checkpoint(&ckpt).unwrap();
        assert_eq!(info.domains.len(), 4);
        assert!(info.encoder_parameters > 0);
        assert!(!info.has_optimizer_state);
        assert_eq!(info.epoch_next, None);
    }
}
