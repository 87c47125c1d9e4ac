//! Emphysema quantification: percent of lung-mask voxels below -950 HU.
//!
//! Masks normally come from an external segmenter. A thresholding surrogate
//! is provided for tests and demos only; its records carry a provenance
//! flag and the CLI requires an explicit opt-in to use it.

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nifti;
use crate::volume::Volume;

/// HU threshold of the low-attenuation-area score; strictly below counts.
pub const EMPHYSEMA_THRESHOLD_HU: f32 = -950.0;
/// HU threshold of the surrogate lung segmentation.
pub const SURROGATE_LUNG_THRESHOLD_HU: f32 = -320.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MaskProvenance {
    /// Mask produced by an external segmentation tool.
    External,
    /// Threshold-based stand-in; testing/demo only.
    Surrogate,
}

/// Binary lung mask aligned voxel-for-voxel with its companion volume.
#[derive(Debug, Clone)]
pub struct LungMask {
    pub voxels: Array3<bool>,
    pub provenance: MaskProvenance,
}

impl LungMask {
    /// Loads an external mask (nonzero voxels are lung).
    pub fn load<P: AsRef<Path>>(path: P) -> Result<LungMask> {
        let image = nifti::read_image(path)?;
        Ok(LungMask {
            voxels: image.data.mapv(|v| v != 0.0),
            provenance: MaskProvenance::External,
        })
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }
}

/// One scored subject with the covariates of the study's linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmphysemaRecord {
    pub subject_id: String,
    /// Percent of masked voxels strictly below -950 HU, in [0, 100].
    pub score: f64,
    /// Kernel domain id the scored volume belongs to.
    pub kernel: String,
    /// Age in years.
    pub age: f64,
    /// 0/1 encoded sex.
    pub sex: u8,
    /// 0 former, 1 current smoker.
    pub smoking: u8,
    /// 0 Siemens, 1 GE.
    pub vendor: u8,
    /// Provenance of the mask used for scoring.
    pub mask_provenance: MaskProvenance,
}

/// Percent of masked voxels with radiodensity strictly below -950 HU.
pub fn emphysema_score(volume: &Volume, mask: &LungMask) -> Result<f64> {
    if volume.voxels.dim() != mask.voxels.dim() {
        return Err(Error::Scoring(format!(
            "mask shape {:?} does not match volume shape {:?}",
            mask.voxels.dim(),
            volume.voxels.dim()
        )));
    }
    let mut below = 0usize;
    let mut total = 0usize;
    ndarray::Zip::from(&volume.voxels)
        .and(&mask.voxels)
        .for_each(|&hu, &m| {
            if m {
                total += 1;
                if hu < EMPHYSEMA_THRESHOLD_HU {
                    below += 1;
                }
            }
        });
    if total == 0 {
        return Err(Error::Scoring("empty lung mask".into()));
    }
    Ok(100.0 * below as f64 / total as f64)
}

/// Threshold-based lung mask: voxels below -320 HU, keeping the two largest
/// 3-D components that do not touch the in-plane image border, with
/// per-slice hole filling. Provenance is marked SURROGATE.
pub fn surrogate_lung_mask(volume: &Volume) -> Result<LungMask> {
    let (nx, ny, nz) = volume.voxels.dim();
    let air = volume.voxels.mapv(|v| v < SURROGATE_LUNG_THRESHOLD_HU);

    // Label 6-connected components, tracking border contact.
    let mut labels = Array3::<u32>::zeros((nx, ny, nz));
    let mut sizes: Vec<(usize, bool)> = Vec::new(); // (voxels, touches border)
    let mut queue = VecDeque::new();
    let mut next_label = 0u32;
    for sx in 0..nx {
        for sy in 0..ny {
            for sz in 0..nz {
                if !air[[sx, sy, sz]] || labels[[sx, sy, sz]] != 0 {
                    continue;
                }
                next_label += 1;
                let mut size = 0usize;
                let mut touches = false;
                labels[[sx, sy, sz]] = next_label;
                queue.push_back((sx, sy, sz));
                while let Some((x, y, z)) = queue.pop_front() {
                    size += 1;
                    if x == 0 || x == nx - 1 || y == 0 || y == ny - 1 {
                        touches = true;
                    }
                    let mut visit = |px: usize, py: usize, pz: usize| {
                        if air[[px, py, pz]] && labels[[px, py, pz]] == 0 {
                            labels[[px, py, pz]] = next_label;
                            queue.push_back((px, py, pz));
                        }
                    };
                    if x > 0 {
                        visit(x - 1, y, z);
                    }
                    if x + 1 < nx {
                        visit(x + 1, y, z);
                    }
                    if y > 0 {
                        visit(x, y - 1, z);
                    }
                    if y + 1 < ny {
                        visit(x, y + 1, z);
                    }
                    if z > 0 {
                        visit(x, y, z - 1);
                    }
                    if z + 1 < nz {
                        visit(x, y, z + 1);
                    }
                }
                sizes.push((size, touches));
            }
        }
    }

    // Two largest interior components.
    let mut interior: Vec<(usize, u32)> = sizes
        .iter()
        .enumerate()
        .filter(|(_, (_, touches))| !touches)
        .map(|(i, (size, _))| (*size, i as u32 + 1))
        .collect();
    interior.sort_by(|a, b| b.cmp(a));
    if interior.is_empty() {
        return Err(Error::Scoring(
            "surrogate mask found no interior lung component".into(),
        ));
    }
    let keep: Vec<u32> = interior.iter().take(2).map(|&(_, l)| l).collect();
    let mut mask = labels.mapv(|l| l != 0 && keep.contains(&l));

    fill_holes_per_slice(&mut mask);
    Ok(LungMask {
        voxels: mask,
        provenance: MaskProvenance::Surrogate,
    })
}

/// Fills in-plane holes: background unreachable from the slice border
/// becomes foreground.
fn fill_holes_per_slice(mask: &mut Array3<bool>) {
    let (nx, ny, nz) = mask.dim();
    let mut reach = vec![false; nx * ny];
    let mut queue = VecDeque::new();
    for z in 0..nz {
        reach.iter_mut().for_each(|v| *v = false);
        queue.clear();
        let idx = |x: usize, y: usize| x * ny + y;
        for x in 0..nx {
            for y in [0, ny - 1] {
                if !mask[[x, y, z]] && !reach[idx(x, y)] {
                    reach[idx(x, y)] = true;
                    queue.push_back((x, y));
                }
            }
        }
        for y in 0..ny {
            for x in [0, nx - 1] {
                if !mask[[x, y, z]] && !reach[idx(x, y)] {
                    reach[idx(x, y)] = true;
                    queue.push_back((x, y));
                }
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            let mut visit = |px: usize, py: usize| {
                if !mask[[px, py, z]] && !reach[idx(px, py)] {
                    reach[idx(px, py)] = true;
                    queue.push_back((px, py));
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < nx {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < ny {
                visit(x, y + 1);
            }
        }
        for x in 0..nx {
            for y in 0..ny {
                if !mask[[x, y, z]] && !reach[idx(x, y)] {
                    mask[[x, y, z]] = true;
                }
            }
        }
    }
}

/// One cohort entry: a volume, its covariates, and an optional external
/// mask path (surrogate segmentation is used when absent, if allowed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortEntry {
    pub subject_id: String,
    pub volume_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub kernel: String,
    pub age: f64,
    pub sex: u8,
    pub smoking: u8,
    pub vendor: u8,
}

/// Per-entry failure captured without aborting the cohort.
#[derive(Debug, Serialize)]
pub struct CohortFailure {
    pub subject_id: String,
    pub volume_path: PathBuf,
    pub error: String,
}

/// Scores every entry, isolating failures. `allow_surrogate` gates the
/// fallback segmentation for entries without an external mask.
pub fn score_cohort(
    entries: &[CohortEntry],
    spec: &crate::volume::NormalizationSpec,
    allow_surrogate: bool,
) -> (Vec<EmphysemaRecord>, Vec<CohortFailure>) {
    use rayon::prelude::*;
    let results: Vec<std::result::Result<EmphysemaRecord, CohortFailure>> = entries
        .par_iter()
        .map(|entry| {
            score_entry(entry, spec, allow_surrogate).map_err(|e| CohortFailure {
                subject_id: entry.subject_id.clone(),
                volume_path: entry.volume_path.clone(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    (records, failures)
}

fn score_entry(
    entry: &CohortEntry,
    spec: &crate::volume::NormalizationSpec,
    allow_surrogate: bool,
) -> Result<EmphysemaRecord> {
    let volume = crate::volume::load_volume(&entry.volume_path, spec)?;
    let mask = match &entry.mask_path {
        Some(path) => LungMask::load(path)?,
        None if allow_surrogate => surrogate_lung_mask(&volume)?,
        None => {
            return Err(Error::Scoring(
                "no mask supplied and surrogate masks are not allowed \
                 (pass --allow-surrogate-mask to opt in)"
                    .into(),
            ))
        }
    };
    let score = emphysema_score(&volume, &mask)?;
    Ok(EmphysemaRecord {
        subject_id: entry.subject_id.clone(),
        score,
        kernel: entry.kernel.clone(),
        age: entry.age,
        sex: entry.sex,
        smoking: entry.smoking,
        vendor: entry.vendor,
        mask_provenance: mask.provenance,
    })
}

/// Writes records as CSV (used by the CLI and downstream analysis).
pub fn write_records_csv<P: AsRef<Path>>(records: &[EmphysemaRecord], path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record([
        "subject_id",
        "score",
        "kernel",
        "age",
        "sex",
        "smoking",
        "vendor",
        "mask_provenance",
    ])?;
    for r in records {
        writer.write_record([
            r.subject_id.as_str(),
            &format!("{}", r.score),
            r.kernel.as_str(),
            &format!("{}", r.age),
            &r.sex.to_string(),
            &r.smoking.to_string(),
            &r.vendor.to_string(),
            match r.mask_provenance {
                MaskProvenance::External => "EXTERNAL",
                MaskProvenance::Surrogate => "SURROGATE",
            },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads records from the CSV produced by [`write_records_csv`].
pub fn read_records_csv<P: AsRef<Path>>(path: P) -> Result<Vec<EmphysemaRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for row in reader.deserialize::<RecordRow>() {
        let row = row?;
        out.push(EmphysemaRecord {
            subject_id: row.subject_id,
            score: row.score,
            kernel: row.kernel,
            age: row.age,
            sex: row.sex,
            smoking: row.smoking,
            vendor: row.vendor,
            mask_provenance: if row.mask_provenance == "SURROGATE" {
                MaskProvenance::Surrogate
            } else {
                MaskProvenance::External
            },
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RecordRow {
    subject_id: String,
    score: f64,
    kernel: String,
    age: f64,
    sex: u8,
    smoking: u8,
    vendor: u8,
    #[serde(default)]
    mask_provenance: String,
}


/// Reads a cohort manifest CSV. Required columns: `subject_id`,
/// `volume_path` (or `path`), `kernel` (or `domain`), `age`, `sex`,
/// `smoking`, `vendor`; `mask_path` is optional (empty disables the
/// external mask). Relative paths resolve against the manifest directory.
pub fn read_cohort_manifest(path: &Path) -> Result<Vec<CohortEntry>> {
    #[derive(Deserialize)]
    struct Row {
        subject_id: String,
        #[serde(alias = "path")]
        volume_path: PathBuf,
        #[serde(default)]
        mask_path: Option<PathBuf>,
        #[serde(alias = "domain")]
        kernel: String,
        age: f64,
        sex: u8,
        smoking: u8,
        vendor: u8,
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: PathBuf| if p.is_relative() { dir.join(p) } else { p };
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        out.push(CohortEntry {
            subject_id: row.subject_id,
            volume_path: resolve(row.volume_path),
            mask_path: row
                .mask_path
                .filter(|p| !p.as_os_str().is_empty())
                .map(resolve),
            kernel: row.kernel,
            age: row.age,
            sex: row.sex,
            smoking: row.smoking,
            vendor: row.vendor,
        });
    }
    Ok(out)
}
