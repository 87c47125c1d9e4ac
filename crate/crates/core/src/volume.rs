//! Volume ingestion, HU clipping/normalization, slice extraction and
//! training-time augmentation.
//!
//! All intensities are Hounsfield Units until normalization maps them into
//! the model range `[-1, 1]`. The map is affine over `[hu_min, hu_max]` and
//! values outside are clipped first, so it is total on finite inputs and
//! exactly invertible inside the clip window.

use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nifti::{self, NiftiGeometry, NiftiImage};

/// Ratio used to oversize slices before the random training crop
/// (512 -> 572 in the reference configuration).
pub const AUGMENT_RESIZE_NUM: usize = 572;
pub const AUGMENT_RESIZE_DEN: usize = 512;

/// A 3-D HU voxel grid with geometry metadata.
#[derive(Debug, Clone)]
pub struct Volume {
    /// Voxels indexed `[x, y, z]`, z the axial axis.
    pub voxels: Array3<f32>,
    /// Per-axis voxel size in mm.
    pub spacing: [f32; 3],
    /// Voxel-to-world transform.
    pub affine: [[f32; 4]; 4],
    /// Where the volume came from (empty for synthetic volumes).
    pub source_path: String,
    /// Non-fatal issues found at load time (e.g. NaN voxels replaced).
    pub warnings: Vec<String>,
}

impl Volume {
    pub fn from_image(image: NiftiImage, source_path: &str) -> Volume {
        Volume {
            voxels: image.data,
            spacing: image.geometry.spacing,
            affine: image.geometry.affine,
            source_path: source_path.to_string(),
            warnings: Vec::new(),
        }
    }

    pub fn to_image(&self) -> NiftiImage {
        let d = self.voxels.dim();
        NiftiImage {
            data: self.voxels.clone(),
            geometry: NiftiGeometry {
                shape: [d.0, d.1, d.2],
                spacing: self.spacing,
                affine: self.affine,
            },
        }
    }

    /// In-plane shape (x, y).
    pub fn in_plane(&self) -> (usize, usize) {
        let d = self.voxels.dim();
        (d.0, d.1)
    }

    pub fn num_slices(&self) -> usize {
        self.voxels.dim().2
    }

    pub fn axial_slice(&self, k: usize) -> ArrayView2<'_, f32> {
        self.voxels.index_axis(ndarray::Axis(2), k)
    }
}

/// The HU window and output range of the normalization map.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NormalizationSpec {
    pub hu_min: f32,
    pub hu_max: f32,
    pub out_min: f32,
    pub out_max: f32,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            hu_min: -1024.0,
            hu_max: 3072.0,
            out_min: -1.0,
            out_max: 1.0,
        }
    }
}

impl NormalizationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hu_min < self.hu_max) || !(self.out_min < self.out_max) {
            return Err(Error::Config(format!(
                "normalization spec requires hu_min < hu_max and out_min < out_max, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Clips to `[hu_min, hu_max]` then maps affinely onto
    /// `[out_min, out_max]`.
    pub fn normalize(&self, hu: f64) -> f64 {
        let hu = hu.clamp(self.hu_min as f64, self.hu_max as f64);
        let t = (hu - self.hu_min as f64) / (self.hu_max as f64 - self.hu_min as f64);
        self.out_min as f64 + t * (self.out_max as f64 - self.out_min as f64)
    }

    /// Exact affine inverse of [`NormalizationSpec::normalize`]; inputs are
    /// clipped to the output range first.
    pub fn denormalize(&self, v: f64) -> f64 {
        let v = v.clamp(self.out_min as f64, self.out_max as f64);
        let t = (v - self.out_min as f64) / (self.out_max as f64 - self.out_min as f64);
        self.hu_min as f64 + t * (self.hu_max as f64 - self.hu_min as f64)
    }
}

/// One normalized axial slice tagged with its kernel domain.
#[derive(Debug, Clone)]
pub struct TrainingSlice {
    /// Pixels in `[out_min, out_max]`, shape (H, W).
    pub pixels: Array2<f64>,
    /// Kernel domain id.
    pub domain: String,
}

/// Loads a NIfTI volume; NaN/Inf voxels are replaced by `hu_min` with a
/// warning recorded on the returned volume.
pub fn load_volume<P: AsRef<Path>>(path: P, spec: &NormalizationSpec) -> Result<Volume> {
    let path = path.as_ref();
    let image = nifti::read_image(path)?;
    let mut volume = Volume::from_image(image, &path.to_string_lossy());
    let mut replaced = 0usize;
    for v in volume.voxels.iter_mut() {
        if !v.is_finite() {
            *v = spec.hu_min;
            replaced += 1;
        }
    }
    if replaced > 0 {
        volume.warnings.push(format!(
            "replaced {replaced} non-finite voxel(s) with {} HU",
            spec.hu_min
        ));
    }
    Ok(volume)
}

/// Writes a volume as float32 HU, clipped to the spec's HU window, with
/// geometry preserved.
pub fn write_volume<P: AsRef<Path>>(volume: &Volume, spec: &NormalizationSpec, path: P) -> Result<()> {
    let mut image = volume.to_image();
    image.data.mapv_inplace(|v| v.clamp(spec.hu_min, spec.hu_max));
    nifti::write_image(&image, path)
}

/// Applies the clip/normalize map to every voxel.
pub fn clip_and_normalize(volume: &Volume, spec: &NormalizationSpec) -> Result<Array3<f64>> {
    spec.validate()?;
    Ok(volume.voxels.mapv(|v| spec.normalize(v as f64)))
}

/// Extracts all axial slices as normalized [`TrainingSlice`]s (unaugmented).
///
/// `expected_in_plane` is the model's input size; volumes on a different
/// grid are rejected rather than silently resampled.
pub fn extract_axial_slices(
    volume: &Volume,
    spec: &NormalizationSpec,
    expected_in_plane: (usize, usize),
    domain: &str,
) -> Result<Vec<TrainingSlice>> {
    spec.validate()?;
    let in_plane = volume.in_plane();
    if in_plane != expected_in_plane {
        return Err(Error::Shape(format!(
            "in-plane shape {}x{} does not match the model input {}x{}; \
             resample the volume to the model grid before harmonization",
            in_plane.0, in_plane.1, expected_in_plane.0, expected_in_plane.1
        )));
    }
    let mut out = Vec::with_capacity(volume.num_slices());
    for k in 0..volume.num_slices() {
        let slice = volume.axial_slice(k);
        let pixels = Array2::from_shape_fn(in_plane, |(i, j)| spec.normalize(slice[[i, j]] as f64));
        out.push(TrainingSlice {
            pixels,
            domain: domain.to_string(),
        });
    }
    Ok(out)
}

/// Bilinear resize with half-pixel-center sampling and edge clamping.
/// Constant inputs map to the same constant.
pub fn resize_bilinear(src: &Array2<f64>, new_h: usize, new_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let scale_y = h as f64 / new_h as f64;
    let scale_x = w as f64 / new_w as f64;
    Array2::from_shape_fn((new_h, new_w), |(i, j)| {
        let sy = ((i as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let sx = ((j as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
        let y0 = sy.floor() as usize;
        let x0 = sx.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let fy = sy - y0 as f64;
        let fx = sx - x0 as f64;
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bot = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bot * fy
    })
}

/// Oversized slice size used before the training crop (rounded 572/512
/// scaling of `n`).
pub fn augment_resize_target(n: usize) -> usize {
    (n * AUGMENT_RESIZE_NUM + AUGMENT_RESIZE_DEN / 2) / AUGMENT_RESIZE_DEN
}

/// Deterministic core of the training augmentation: resize to the oversized
/// grid, crop at `(crop_y, crop_x)`, optionally flip horizontally.
pub fn augment_with(
    slice: &Array2<f64>,
    spec: &NormalizationSpec,
    crop_y: usize,
    crop_x: usize,
    flip: bool,
) -> Result<Array2<f64>> {
    let (h, w) = slice.dim();
    let (rh, rw) = (augment_resize_target(h), augment_resize_target(w));
    if crop_y + h > rh || crop_x + w > rw {
        return Err(Error::Shape(format!(
            "crop offset ({crop_y}, {crop_x}) out of range for {rh}x{rw} resize"
        )));
    }
    let resized = resize_bilinear(slice, rh, rw);
    let mut out = resized
        .slice(ndarray::s![crop_y..crop_y + h, crop_x..crop_x + w])
        .to_owned();
    if flip {
        out.invert_axis(ndarray::Axis(1));
    }
    let (lo, hi) = (spec.out_min as f64, spec.out_max as f64);
    out.mapv_inplace(|v| v.clamp(lo, hi));
    Ok(out)
}

/// Training augmentation: bilinear oversize, uniform random crop back to the
/// input size, and a horizontal flip with probability 0.5. Deterministic
/// given the generator state. Draw order: crop_y, crop_x, flip.
pub fn augment_for_training<R: Rng>(
    slice: &Array2<f64>,
    spec: &NormalizationSpec,
    domain: &str,
    rng: &mut R,
) -> Result<TrainingSlice> {
    let (h, w) = slice.dim();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("slice too small to augment: {h}x{w}")));
    }
    let (rh, rw) = (augment_resize_target(h), augment_resize_target(w));
    let crop_y = rng.gen_range(0..=rh - h);
    let crop_x = rng.gen_range(0..=rw - w);
    let flip = rng.gen_bool(0.5);
    Ok(TrainingSlice {
        pixels: augment_with(slice, spec, crop_y, crop_x, flip)?,
        domain: domain.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn flat_volume(nx: usize, ny: usize, nz: usize, hu: f32) -> Volume {
        Volume {
            voxels: Array3::from_elem((nx, ny, nz), hu),
            spacing: [1.0, 1.0, 1.0],
            affine: {
                let mut a = [[0f32; 4]; 4];
                a[0][0] = 1.0;
                a[1][1] = 1.0;
                a[2][2] = 1.0;
                a[3][3] = 1.0;
                a
            },
            source_path: String::new(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn normalization_hits_the_documented_anchor_points() {
        let spec = NormalizationSpec::default();
        assert_eq!(spec.normalize(-1024.0), -1.0);
        assert_eq!(spec.normalize(3072.0), 1.0);
        // (0 + 1024) / 4096 * 2 - 1 = -0.5
        assert!((spec.normalize(0.0) - (-0.5)).abs() < 1e-12);
        // Clipping above the window.
        assert_eq!(spec.normalize(5000.0), 1.0);
        assert_eq!(spec.normalize(-2000.0), -1.0);
    }

    #[test]
    fn denormalization_inverts_the_anchor_points() {
        let spec = NormalizationSpec::default();
        assert_eq!(spec.denormalize(-1.0), -1024.0);
        assert_eq!(spec.denormalize(1.0), 3072.0);
        // Midpoint of [-1, 1] maps to the HU window midpoint.
        assert!((spec.denormalize(0.0) - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_error_stays_under_a_millihounsfield() {
        let spec = NormalizationSpec::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..1_000_000 {
            let hu: f64 = rng.gen_range(-2000.0..4000.0);
            let clipped = hu.clamp(spec.hu_min as f64, spec.hu_max as f64);
            let rt = spec.denormalize(spec.normalize(hu));
            assert!(
                (rt - clipped).abs() <= 1e-3,
                "round trip off at {hu}: {rt} vs {clipped}"
            );
        }
    }

    proptest! {
        #[test]
        fn normalization_is_monotone_and_in_range(a in -3000.0f64..5000.0, b in -3000.0f64..5000.0) {
            let spec = NormalizationSpec::default();
            let (lo, hi) = (a.min(b), a.max(b));
            let (nlo, nhi) = (spec.normalize(lo), spec.normalize(hi));
            prop_assert!(nlo <= nhi);
            prop_assert!((-1.0..=1.0).contains(&nlo) && (-1.0..=1.0).contains(&nhi));
        }
    }

    #[test]
    fn nan_voxels_are_replaced_with_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.nii");
        let mut vol = flat_volume(8, 8, 2, -300.0);
        vol.voxels[[3, 4, 1]] = f32::NAN;
        vol.voxels[[0, 0, 0]] = f32::INFINITY;
        crate::nifti::write_image(&vol.to_image(), &path).unwrap();

        let spec = NormalizationSpec::default();
        let loaded = load_volume(&path, &spec).unwrap();
        assert_eq!(loaded.voxels[[3, 4, 1]], spec.hu_min);
        assert_eq!(loaded.voxels[[0, 0, 0]], spec.hu_min);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("2 non-finite"));
        assert!(loaded.voxels.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn missing_file_is_an_ingest_error() {
        let err = load_volume("/no/such/file.nii", &NormalizationSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Ingest { .. }));
    }

    #[test]
    fn slice_extraction_counts_and_shape_gate() {
        let spec = NormalizationSpec::default();
        let vol = flat_volume(32, 32, 5, -900.0);
        let slices = extract_axial_slices(&vol, &spec, (32, 32), "ge_std").unwrap();
        assert_eq!(slices.len(), 5);
        assert_eq!(slices[0].pixels.dim(), (32, 32));
        assert_eq!(slices[0].domain, "ge_std");

        let one = flat_volume(32, 32, 1, 0.0);
        assert_eq!(extract_axial_slices(&one, &spec, (32, 32), "d").unwrap().len(), 1);

        let wrong = flat_volume(16, 16, 4, 0.0);
        let err = extract_axial_slices(&wrong, &spec, (32, 32), "d").unwrap_err();
        assert!(err.to_string().contains("resample"), "{err}");
    }

    #[test]
    fn resize_target_matches_reference_ratio() {
        assert_eq!(augment_resize_target(512), 572);
        assert_eq!(augment_resize_target(128), 143);
    }

    #[test]
    fn forced_corner_crop_matches_the_plain_resize() {
        let spec = NormalizationSpec::default();
        let slice = Array2::from_shape_fn((64, 64), |(i, j)| {
            ((i * 31 + j * 17) % 97) as f64 / 48.5 - 1.0
        });
        let resized = resize_bilinear(&slice, augment_resize_target(64), augment_resize_target(64));
        let cropped = augment_with(&slice, &spec, 0, 0, false).unwrap();
        assert_eq!(cropped, resized.slice(ndarray::s![0..64, 0..64]).to_owned());
    }

    #[test]
    fn augmentation_is_deterministic_given_the_seed() {
        let spec = NormalizationSpec::default();
        let slice = Array2::from_shape_fn((48, 48), |(i, j)| ((i + 2 * j) % 11) as f64 / 5.5 - 1.0);
        let a = augment_for_training(&slice, &spec, "d", &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        let b = augment_for_training(&slice, &spec, "d", &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn augmentation_preserves_constants_range_and_shape() {
        let spec = NormalizationSpec::default();
        let slice = Array2::from_elem((40, 40), 0.25f64);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..8 {
            let out = augment_for_training(&slice, &spec, "d", &mut rng).unwrap();
            assert_eq!(out.pixels.dim(), (40, 40));
            for &v in out.pixels.iter() {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn augmentation_never_leaves_the_value_range(seed in 0u64..1000) {
            let spec = NormalizationSpec::default();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let slice = Array2::from_shape_fn((24, 24), |_| rng.gen_range(-1.0..=1.0));
            let out = augment_for_training(&slice, &spec, "d", &mut rng).unwrap();
            prop_assert_eq!(out.pixels.dim(), (24, 24));
            for &v in out.pixels.iter() {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
