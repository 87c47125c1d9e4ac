//! Synthetic kernel-style dataset generator.
//!
//! Produces lung-like 2-D HU phantoms whose low-density pocket fraction is
//! known exactly, then styles disjoint copies per kernel domain: soft styles
//! smooth, hard styles sharpen and carry markedly more noise, and the noise
//! correlation length separates the two vendors. This gives the pipeline an
//! unpaired four-domain corpus with ground truth where real cohort data is
//! access-restricted.
//!
//! All geometry and sampling constants are fixed here so downstream
//! thresholds stay stable across runs.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::domains::{DomainRegistry, Hardness, Vendor};
use crate::error::{Error, Result};
use crate::nifti::{NiftiGeometry, NiftiImage};
use crate::nn::derive_rng;

/// Background (air outside the body) in HU.
const BACKGROUND_HU: f32 = -1024.0;
/// Soft-tissue body ellipse in HU.
const BODY_HU: f32 = 20.0;
/// Healthy lung parenchyma in HU.
const LUNG_HU: f32 = -880.0;
/// Emphysema-like pocket in HU (safely below the -950 scoring threshold).
const POCKET_HU: f32 = -1005.0;
/// Peak amplitude of the smooth parenchyma texture in HU.
const TEXTURE_AMPLITUDE: f32 = 25.0;
/// Correlation length of the parenchyma texture, px.
const TEXTURE_SIGMA: f64 = 3.0;
/// Correlation length of the pocket field, px.
const POCKET_SIGMA: f64 = 3.0;
/// Inner blur of the unsharp mask, px.
const UNSHARP_SIGMA: f64 = 1.0;

/// Texture controls of one synthetic kernel style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    /// Soft-kernel smoothing, px.
    pub blur_sigma: f64,
    /// Hard-kernel unsharp-mask gain (0 disables).
    pub sharpen_amount: f64,
    /// Std of the additive noise, HU.
    pub noise_sigma: f64,
    /// Correlation length of the noise, px (vendor signature).
    pub grain_sigma: f64,
}

impl StyleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("blur_sigma", self.blur_sigma),
            ("sharpen_amount", self.sharpen_amount),
            ("noise_sigma", self.noise_sigma),
            ("grain_sigma", self.grain_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "style parameter {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Styles of the four study domains. Hard styles sharpen and are noisier
/// than the sibling soft style; GE noise has a longer correlation length
/// than Siemens.
pub fn default_styles() -> BTreeMap<String, StyleParams> {
    let mut styles = BTreeMap::new();
    styles.insert(
        "siemens_b30f".to_string(),
        StyleParams { blur_sigma: 0.9, sharpen_amount: 0.0, noise_sigma: 12.0, grain_sigma: 0.6 },
    );
    styles.insert(
        "siemens_b50f".to_string(),
        StyleParams { blur_sigma: 0.0, sharpen_amount: 0.8, noise_sigma: 45.0, grain_sigma: 0.6 },
    );
    styles.insert(
        "ge_std".to_string(),
        StyleParams { blur_sigma: 1.1, sharpen_amount: 0.0, noise_sigma: 16.0, grain_sigma: 1.2 },
    );
    styles.insert(
        "ge_bone".to_string(),
        StyleParams { blur_sigma: 0.0, sharpen_amount: 1.0, noise_sigma: 50.0, grain_sigma: 1.2 },
    );
    styles
}

/// A generated base image with its exact ground truth.
#[derive(Debug, Clone)]
pub struct BaseImage {
    /// HU image, shape (H, W).
    pub image: Array2<f32>,
    /// Ground-truth lung region.
    pub lung_mask: Array2<bool>,
    /// Exact fraction of lung voxels below -950 HU in the unstyled image.
    pub true_fraction: f64,
}

/// Separable Gaussian blur with edge replication; sigma 0 is the identity.
pub fn gaussian_blur(image: &Array2<f32>, sigma: f64) -> Array2<f32> {
    if sigma <= 0.0 {
        return image.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let (h, w) = image.dim();
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut tmp = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (i, k) in kernel.iter().enumerate() {
                let sx = clamp(x as isize + i as isize - radius, w);
                acc += k * image[[y, sx]] as f64;
            }
            tmp[[y, x]] = acc as f32;
        }
    }
    let mut out = Array2::<f32>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (i, k) in kernel.iter().enumerate() {
                let sy = clamp(y as isize + i as isize - radius, h);
                acc += k * tmp[[sy, x]] as f64;
            }
            out[[y, x]] = acc as f32;
        }
    }
    out
}

/// Zero-mean, unit-std smooth random field (white noise blurred to the
/// requested correlation length).
fn smooth_field(h: usize, w: usize, sigma: f64, rng: &mut ChaCha20Rng) -> Array2<f32> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let white = Array2::from_shape_fn((h, w), |_| normal.sample(rng) as f32);
    let mut field = gaussian_blur(&white, sigma);
    let n = (h * w) as f64;
    let mean = field.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = field.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let inv_std = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    field.mapv_inplace(|v| ((v as f64 - mean) * inv_std) as f32);
    field
}

/// Mean absolute 4-neighbor Laplacian response over the image interior —
/// the high-pass noise-energy statistic used to compare kernel styles.
pub fn high_pass_energy(image: &Array2<f32>) -> f64 {
    let (h, w) = image.dim();
    if h < 3 || w < 3 {
        return 0.0;
    }
    let mut acc = 0.0f64;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let lap = 4.0 * image[[y, x]] as f64
                - image[[y - 1, x]] as f64
                - image[[y + 1, x]] as f64
                - image[[y, x - 1]] as f64
                - image[[y, x + 1]] as f64;
            acc += lap.abs();
        }
    }
    acc / ((h - 2) * (w - 2)) as f64
}

/// Generates one lung-like phantom: an elliptical body at soft-tissue HU,
/// two lung ellipses near -880 HU with smooth texture, and low-density
/// pockets placed by thresholding a smooth field at the quantile that makes
/// the sub--950 lung fraction equal `fraction` (up to one voxel).
pub fn generate_base(seed: u64, height: usize, width: usize, fraction: f64) -> Result<BaseImage> {
    if height < 32 || width < 32 {
        return Err(Error::Config(format!(
            "phantom size must be at least 32x32, got {height}x{width}"
        )));
    }
    if !(0.0..=0.9).contains(&fraction) {
        return Err(Error::Config(format!(
            "pocket fraction must be in [0, 0.9], got {fraction}"
        )));
    }
    let mut rng = derive_rng(seed, "phantom/base");
    let texture = smooth_field(height, width, TEXTURE_SIGMA, &mut rng);
    let pocket_field = smooth_field(height, width, POCKET_SIGMA, &mut rng);

    let (hf, wf) = (height as f32, width as f32);
    let mut image = Array2::<f32>::from_elem((height, width), BACKGROUND_HU);
    let mut lung = Array2::<bool>::from_elem((height, width), false);
    let inside = |y: f32, x: f32, cy: f32, cx: f32, ry: f32, rx: f32| {
        let dy = (y - cy) / ry;
        let dx = (x - cx) / rx;
        dy * dy + dx * dx < 1.0
    };
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f32, x as f32);
            if inside(yf, xf, hf * 0.5, wf * 0.5, hf * 0.44, wf * 0.46) {
                image[[y, x]] = BODY_HU;
            }
            let in_left = inside(yf, xf, hf * 0.5, wf * 0.33, hf * 0.30, wf * 0.15);
            let in_right = inside(yf, xf, hf * 0.5, wf * 0.67, hf * 0.30, wf * 0.15);
            if in_left || in_right {
                let tex = (texture[[y, x]] * TEXTURE_AMPLITUDE)
                    .clamp(-1.5 * TEXTURE_AMPLITUDE, 1.5 * TEXTURE_AMPLITUDE);
                image[[y, x]] = LUNG_HU + tex;
                lung[[y, x]] = true;
            }
        }
    }

    // Pockets: lowest `fraction` quantile of the smooth field inside the lung.
    let mut lung_values: Vec<f32> = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if lung[[y, x]] {
                lung_values.push(pocket_field[[y, x]]);
            }
        }
    }
    let lung_count = lung_values.len();
    let pocket_target = (fraction * lung_count as f64).floor() as usize;
    if pocket_target > 0 {
        lung_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let threshold = lung_values[pocket_target - 1];
        for y in 0..height {
            for x in 0..width {
                if lung[[y, x]] && pocket_field[[y, x]] <= threshold {
                    image[[y, x]] = POCKET_HU;
                }
            }
        }
    }

    // Exact achieved fraction by direct count.
    let below = ndarray::Zip::from(&image).and(&lung).fold(0usize, |acc, &hu, &m| {
        acc + usize::from(m && hu < crate::quantify::EMPHYSEMA_THRESHOLD_HU)
    });
    let true_fraction = below as f64 / lung_count as f64;

    Ok(BaseImage { image, lung_mask: lung, true_fraction })
}

/// Applies a kernel style: blur, unsharp mask, then correlated Gaussian
/// noise (white noise blurred to `grain_sigma`, rescaled to `noise_sigma`
/// per voxel); output clipped to [-1024, 3072].
pub fn apply_style(base: &Array2<f32>, params: &StyleParams, rng: &mut ChaCha20Rng) -> Result<Array2<f32>> {
    params.validate()?;
    let mut out = gaussian_blur(base, params.blur_sigma);
    if params.sharpen_amount > 0.0 {
        let smoothed = gaussian_blur(&out, UNSHARP_SIGMA);
        ndarray::Zip::from(&mut out).and(&smoothed).for_each(|o, &s| {
            *o += params.sharpen_amount as f32 * (*o - s);
        });
    }
    if params.noise_sigma > 0.0 {
        let (h, w) = base.dim();
        let grain = smooth_field(h, w, params.grain_sigma, rng);
        ndarray::Zip::from(&mut out).and(&grain).for_each(|o, &g| {
            *o += params.noise_sigma as f32 * g;
        });
    }
    out.mapv_inplace(|v| v.clamp(-1024.0, 3072.0));
    Ok(out)
}

/// Dataset build parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    /// Slice side length.
    pub size: usize,
    pub subjects_per_domain: usize,
    pub slices_per_subject: usize,
    pub seed: u64,
    /// Per-subject true pocket fraction is drawn uniformly from this range.
    pub fraction_range: (f64, f64),
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 128,
            subjects_per_domain: 10,
            slices_per_subject: 8,
            seed: 17,
            fraction_range: (0.02, 0.25),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::Config("phantom size must be at least 32".into()));
        }
        if self.subjects_per_domain == 0 || self.slices_per_subject == 0 {
            return Err(Error::Config("phantom subject/slice counts must be positive".into()));
        }
        let (lo, hi) = self.fraction_range;
        if !(0.0..=0.9).contains(&lo) || !(0.0..=0.9).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "fraction range must satisfy 0 <= lo <= hi <= 0.9, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// One generated slice with its metadata; mirrors a manifest row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomEntry {
    pub subject_id: String,
    pub domain: String,
    /// Age in years; uniform over the 55-74 screening range.
    pub age: f64,
    /// Bernoulli(0.5).
    pub sex: u8,
    /// Bernoulli(0.5); 0 former, 1 current.
    pub smoking: u8,
    /// 0 Siemens, 1 GE, from the domain's vendor.
    pub vendor: u8,
    /// Exact sub--950 lung fraction of the unstyled base image.
    pub true_fraction: f64,
    pub path: PathBuf,
    pub mask_path: PathBuf,
}

#[derive(Debug)]
pub struct PhantomDataset {
    pub entries: Vec<PhantomEntry>,
    pub manifest_path: PathBuf,
}

fn slice_image(data: Array2<f32>) -> NiftiImage {
    let (h, w) = data.dim();
    let voxels = Array3::from_shape_fn((h, w, 1), |(y, x, _)| data[[y, x]]);
    let mut affine = [[0f32; 4]; 4];
    for (i, row) in affine.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    NiftiImage {
        data: voxels,
        geometry: NiftiGeometry { shape: [h, w, 1], spacing: [1.0, 1.0, 1.0], affine },
    }
}

/// Builds the unpaired 4-domain dataset: every domain gets its own disjoint
/// base images (fresh seeds per domain/subject/slice), styled with that
/// domain's parameters. Emits one NIfTI per slice plus a ground-truth lung
/// mask, and a manifest CSV; byte-identical for a fixed seed.
pub fn build_phantom_dataset(
    config: &PhantomConfig,
    registry: &DomainRegistry,
    styles: &BTreeMap<String, StyleParams>,
    out_dir: &Path,
) -> Result<PhantomDataset> {
    config.validate()?;
    for id in registry.ids() {
        let style = styles
            .get(id)
            .ok_or_else(|| Error::Config(format!("no style parameters for domain `{id}`")))?;
        style.validate()?;
    }
    // Hard styles must be noisier than the sibling soft style.
    for vendor in [Vendor::Siemens, Vendor::Ge] {
        let noise = |hardness: Hardness| -> Option<f64> {
            registry
                .domains()
                .iter()
                .find(|d| d.vendor == vendor && d.hardness == hardness)
                .and_then(|d| styles.get(d.id.as_str()))
                .map(|s| s.noise_sigma)
        };
        if let (Some(hard), Some(soft)) = (noise(Hardness::Hard), noise(Hardness::Soft)) {
            if hard <= soft {
                return Err(Error::Config(format!(
                    "hard style must be noisier than soft for {vendor:?}: {hard} vs {soft}"
                )));
            }
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for domain in registry.domains() {
        let style = &styles[domain.id.as_str()];
        let vendor = match domain.vendor {
            Vendor::Siemens => 0u8,
            Vendor::Ge => 1u8,
        };
        for subject in 0..config.subjects_per_domain {
            let subject_id = format!("{}_s{subject:03}", domain.id);
            let mut cov_rng = derive_rng(config.seed, &format!("covariates/{subject_id}"));
            let age = cov_rng.gen_range(55..=74) as f64;
            let sex = u8::from(cov_rng.gen_bool(0.5));
            let smoking = u8::from(cov_rng.gen_bool(0.5));
            let (flo, fhi) = config.fraction_range;
            let fraction = if flo == fhi { flo } else { cov_rng.gen_range(flo..fhi) };

            for slice in 0..config.slices_per_subject {
                let tag = format!("base/{subject_id}/k{slice:02}");
                let base_seed = {
                    // Stable per-image seed; disjoint across domains.
                    use rand::RngCore;
                    derive_rng(config.seed, &tag).next_u64()
                };
                let base = generate_base(base_seed, config.size, config.size, fraction)?;
                let mut style_rng = derive_rng(config.seed, &format!("style/{subject_id}/k{slice:02}"));
                let styled = apply_style(&base.image, style, &mut style_rng)?;

                let rel_image = PathBuf::from(format!("images/{}/{subject_id}_k{slice:02}.nii.gz", domain.id));
                let rel_mask = PathBuf::from(format!("masks/{}/{subject_id}_k{slice:02}.nii.gz", domain.id));
                crate::nifti::write_image(&slice_image(styled), out_dir.join(&rel_image))?;
                let mask_f32 = base.lung_mask.mapv(|m| if m { 1.0f32 } else { 0.0 });
                crate::nifti::write_image(&slice_image(mask_f32), out_dir.join(&rel_mask))?;

                entries.push(PhantomEntry {
                    subject_id: subject_id.clone(),
                    domain: domain.id.clone(),
                    age,
                    sex,
                    smoking,
                    vendor,
                    true_fraction: base.true_fraction,
                    path: rel_image,
                    mask_path: rel_mask,
                });
            }
        }
    }

    let manifest_path = out_dir.join("manifest.csv");
    write_manifest(&entries, &manifest_path)?;
    Ok(PhantomDataset { entries, manifest_path })
}

fn write_manifest(entries: &[PhantomEntry], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("subject_id,domain,age,sex,smoking,vendor,true_fraction,path,mask_path\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{}\n",
            e.subject_id,
            e.domain,
            e.age,
            e.sex,
            e.smoking,
            e.vendor,
            e.true_fraction,
            e.path.display(),
            e.mask_path.display()
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a manifest produced by [`build_phantom_dataset`]. Relative paths
/// are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PhantomEntry>> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<PhantomEntry>() {
        let mut entry = row?;
        if entry.path.is_relative() {
            entry.path = dir.join(&entry.path);
        }
        if entry.mask_path.is_relative() {
            entry.mask_path = dir.join(&entry.mask_path);
        }
        entries.push(entry);
    }
    Ok(entries)
}
