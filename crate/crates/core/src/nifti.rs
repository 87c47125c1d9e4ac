//! Minimal NIfTI-1 reader/writer.
//!
//! Covers the slice of the format this pipeline needs: little-endian
//! single-file `.nii` / `.nii.gz`, 3-D images, the common voxel types on
//! read (uint8, int16, uint16, int32, float32, float64) with
//! `scl_slope`/`scl_inter` applied, and float32 output on write. The sform
//! is preferred for orientation, falling back to the qform quaternion, then
//! to a diagonal spacing matrix.

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array3, ShapeBuilder};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_UINT16: i16 = 512;

/// Geometry and scaling metadata parsed from a NIfTI-1 header.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiGeometry {
    pub shape: [usize; 3],
    /// Per-axis voxel size in mm (pixdim[1..=3]).
    pub spacing: [f32; 3],
    /// Voxel-to-world transform (row-major 4x4).
    pub affine: [[f32; 4]; 4],
}

/// A decoded 3-D image: voxels indexed `[x, y, z]`, x fastest on disk.
#[derive(Debug, Clone)]
pub struct NiftiImage {
    pub data: Array3<f32>,
    pub geometry: NiftiGeometry,
}

fn ingest<P: AsRef<Path>>(path: P, message: impl Into<String>) -> Error {
    Error::ingest(path.as_ref(), message)
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Reads a `.nii` or `.nii.gz` file into memory.
pub fn read_image<P: AsRef<Path>>(path: P) -> Result<NiftiImage> {
    let path = path.as_ref();
    let mut raw = Vec::new();
    let file = File::open(path).map_err(|e| ingest(path, format!("cannot open: {e}")))?;
    if is_gz(path) {
        MultiGzDecoder::new(file)
            .read_to_end(&mut raw)
            .map_err(|e| ingest(path, format!("gzip decode failed: {e}")))?;
    } else {
        let mut file = file;
        file.read_to_end(&mut raw)
            .map_err(|e| ingest(path, format!("read failed: {e}")))?;
    }
    decode(&raw).map_err(|e| match e {
        Error::Ingest { message, .. } => ingest(path, message),
        other => other,
    })
}

/// Decodes an in-memory single-file NIfTI-1 byte stream.
pub fn decode(raw: &[u8]) -> Result<NiftiImage> {
    let anon = Path::new("<bytes>");
    if raw.len() < HEADER_SIZE {
        return Err(ingest(anon, "file shorter than the 348-byte NIfTI-1 header"));
    }
    let sizeof_hdr = LittleEndian::read_i32(&raw[0..4]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        // 0x5C010000 read big-endian is 348; reject rather than mis-scale.
        if i32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) == HEADER_SIZE as i32 {
            return Err(ingest(anon, "big-endian NIfTI is not supported"));
        }
        return Err(ingest(anon, format!("malformed header: sizeof_hdr = {sizeof_hdr}")));
    }
    if &raw[344..348] != MAGIC_SINGLE {
        return Err(ingest(anon, "missing `n+1` magic (only single-file NIfTI-1 is supported)"));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = LittleEndian::read_i16(&raw[40 + 2 * i..]);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(ingest(anon, format!("malformed header: dim[0] = {ndim}")));
    }
    // Accept exactly-3-D images, or higher-rank images whose trailing
    // dimensions are singleton.
    if ndim < 3 || dim[1] < 1 || dim[2] < 1 || dim[3] < 1 {
        return Err(ingest(anon, format!("expected 3-D volume, got {ndim}-D image")));
    }
    for d in dim.iter().take(ndim as usize + 1).skip(4) {
        if *d > 1 {
            return Err(ingest(anon, format!("expected 3-D volume, got {ndim}-D image")));
        }
    }
    let shape = [dim[1] as usize, dim[2] as usize, dim[3] as usize];
    let n_vox = shape[0] * shape[1] * shape[2];

    let datatype = LittleEndian::read_i16(&raw[70..]);
    let elem = match datatype {
        DT_UINT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => {
            return Err(ingest(anon, format!("unsupported NIfTI datatype code {other}")));
        }
    };

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = LittleEndian::read_f32(&raw[76 + 4 * i..]);
    }
    let spacing = [pixdim[1], pixdim[2], pixdim[3]];

    let vox_offset = LittleEndian::read_f32(&raw[108..]) as usize;
    let vox_offset = vox_offset.max(VOX_OFFSET);
    let scl_slope = LittleEndian::read_f32(&raw[112..]);
    let scl_inter = LittleEndian::read_f32(&raw[116..]);
    let (slope, inter) = if scl_slope == 0.0 || !scl_slope.is_finite() {
        (1.0, 0.0)
    } else {
        (scl_slope, scl_inter)
    };

    let need = vox_offset + n_vox * elem;
    if raw.len() < need {
        return Err(ingest(
            anon,
            format!("truncated voxel data: need {need} bytes, file has {}", raw.len()),
        ));
    }
    let body = &raw[vox_offset..need];

    let mut data = Vec::with_capacity(n_vox);
    match datatype {
        DT_UINT8 => data.extend(body.iter().map(|&b| b as f32)),
        DT_INT16 => data.extend(
            body.chunks_exact(2)
                .map(|c| LittleEndian::read_i16(c) as f32),
        ),
        DT_UINT16 => data.extend(
            body.chunks_exact(2)
                .map(|c| LittleEndian::read_u16(c) as f32),
        ),
        DT_INT32 => data.extend(
            body.chunks_exact(4)
                .map(|c| LittleEndian::read_i32(c) as f32),
        ),
        DT_FLOAT32 => data.extend(body.chunks_exact(4).map(LittleEndian::read_f32)),
        DT_FLOAT64 => data.extend(
            body.chunks_exact(8)
                .map(|c| LittleEndian::read_f64(c) as f32),
        ),
        _ => unreachable!(),
    }
    if slope != 1.0 || inter != 0.0 {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }

    // NIfTI voxel order is x-fastest (Fortran order).
    let data = Array3::from_shape_vec(shape.f(), data)
        .map_err(|e| ingest(anon, format!("shape/data mismatch: {e}")))?;

    let affine = read_affine(raw, &pixdim);

    Ok(NiftiImage {
        data,
        geometry: NiftiGeometry {
            shape,
            spacing,
            affine,
        },
    })
}

fn read_affine(raw: &[u8], pixdim: &[f32; 8]) -> [[f32; 4]; 4] {
    let qform_code = LittleEndian::read_i16(&raw[252..]);
    let sform_code = LittleEndian::read_i16(&raw[254..]);

    if sform_code > 0 {
        let mut affine = [[0f32; 4]; 4];
        for (r, row) in affine.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = LittleEndian::read_f32(&raw[280 + 16 * r + 4 * c..]);
            }
        }
        affine[3] = [0.0, 0.0, 0.0, 1.0];
        return affine;
    }

    if qform_code > 0 {
        let b = LittleEndian::read_f32(&raw[256..]) as f64;
        let c = LittleEndian::read_f32(&raw[260..]) as f64;
        let d = LittleEndian::read_f32(&raw[264..]) as f64;
        let ox = LittleEndian::read_f32(&raw[268..]);
        let oy = LittleEndian::read_f32(&raw[272..]);
        let oz = LittleEndian::read_f32(&raw[276..]);
        let a = (1.0 - b * b - c * c - d * d).max(0.0).sqrt();
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let (sx, sy, sz) = (pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64 * qfac as f64);
        let r = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ];
        let mut affine = [[0f32; 4]; 4];
        for i in 0..3 {
            affine[i][0] = (r[i][0] * sx) as f32;
            affine[i][1] = (r[i][1] * sy) as f32;
            affine[i][2] = (r[i][2] * sz) as f32;
        }
        affine[0][3] = ox;
        affine[1][3] = oy;
        affine[2][3] = oz;
        affine[3] = [0.0, 0.0, 0.0, 1.0];
        return affine;
    }

    // No orientation stored; synthesize a scaling transform.
    let mut affine = [[0f32; 4]; 4];
    affine[0][0] = pixdim[1];
    affine[1][1] = pixdim[2];
    affine[2][2] = pixdim[3];
    affine[3][3] = 1.0;
    affine
}

/// Encodes an image as float32 single-file NIfTI-1 bytes (sform carries the
/// affine).
pub fn encode(image: &NiftiImage) -> Result<Vec<u8>> {
    let dims = image.data.dim();
    let shape = [dims.0, dims.1, dims.2];
    if shape != image.geometry.shape {
        return Err(Error::Shape(format!(
            "geometry shape {:?} does not match data shape {:?}",
            image.geometry.shape, shape
        )));
    }
    let n_vox = shape[0] * shape[1] * shape[2];
    let mut out = Vec::with_capacity(VOX_OFFSET + n_vox * 4);

    let mut header = vec![0u8; HEADER_SIZE];
    LittleEndian::write_i32(&mut header[0..4], HEADER_SIZE as i32);
    let dim: [i16; 8] = [3, shape[0] as i16, shape[1] as i16, shape[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut header[40 + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut header[70..], DT_FLOAT32);
    LittleEndian::write_i16(&mut header[72..], 32); // bitpix
    let pixdim: [f32; 8] = [
        1.0,
        image.geometry.spacing[0],
        image.geometry.spacing[1],
        image.geometry.spacing[2],
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut header[76 + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut header[108..], VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut header[112..], 1.0); // scl_slope
    LittleEndian::write_f32(&mut header[116..], 0.0); // scl_inter
    LittleEndian::write_i16(&mut header[252..], 0); // qform_code
    LittleEndian::write_i16(&mut header[254..], 1); // sform_code: scanner anat
    for r in 0..3 {
        for c in 0..4 {
            LittleEndian::write_f32(&mut header[280 + 16 * r + 4 * c..], image.geometry.affine[r][c]);
        }
    }
    header[344..348].copy_from_slice(MAGIC_SINGLE);

    out.extend_from_slice(&header);
    out.extend_from_slice(&[0u8; VOX_OFFSET - HEADER_SIZE]);

    // x-fastest on disk.
    for z in 0..shape[2] {
        for y in 0..shape[1] {
            for x in 0..shape[0] {
                out.write_f32::<LittleEndian>(image.data[[x, y, z]])
                    .expect("vec write cannot fail");
            }
        }
    }
    Ok(out)
}

/// Writes a float32 `.nii` or `.nii.gz` file, format chosen by extension.
pub fn write_image<P: AsRef<Path>>(image: &NiftiImage, path: P) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let bytes = encode(image)?;
    let file = File::create(path)?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::fast());
        enc.write_all(&bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes)?;
        w.flush()?;
    }
    Ok(())
}
