//! Versioned checkpoint container.
//!
//! Layout: magic + schema version, JSON-encoded arch/registry/config
//! headers, then the raw little-endian f64 parameter tensors of every
//! component in canonical order (encoders, decoders, discriminators; domains
//! sorted by id; layer order within a component), and optionally the
//! training state (epoch counter, run seed, Adam moments aligned with the
//! same canonical order). Serialization is fully deterministic, so
//! save -> load -> save reproduces the file byte for byte.
//!
//! Resume determinism needs no explicit RNG dump: checkpoints are written at
//! epoch boundaries and every training-time stream is re-derived from
//! (run seed, epoch), which the checkpoint stores.

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::domains::DomainRegistry;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::networks::{ArchConfig, ModelBundle};
use crate::nn::{AdamState, Param};
use crate::trainer::TrainConfig;

pub const MAGIC: &[u8; 4] = b"KHCP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Optimizer and schedule state carried alongside the parameters.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Next epoch to run (0-based).
    pub epoch_next: u32,
    /// Run seed; with the epoch it determines every training-time stream.
    pub seed: u64,
    pub train_cfg: TrainConfig,
    pub loss_cfg: LossConfig,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
}

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 64 * 1024 * 1024 {
        return Err(ck(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| ck(format!("non-utf8 string: {e}")))
}

fn write_array<W: Write>(w: &mut W, a: &ndarray::ArrayD<f64>) -> Result<()> {
    let shape = a.shape();
    w.write_u8(shape.len() as u8)?;
    for &d in shape {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    let slice = a.as_slice().expect("parameters are standard layout");
    let mut bytes = vec![0u8; slice.len() * 8];
    LittleEndian::write_f64_into(slice, &mut bytes);
    w.write_all(&bytes)?;
    Ok(())
}

fn read_array<R: Read>(r: &mut R) -> Result<ndarray::ArrayD<f64>> {
    let ndim = r.read_u8()? as usize;
    if ndim > 8 {
        return Err(ck(format!("implausible tensor rank {ndim}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.read_u32::<LittleEndian>()? as usize);
    }
    let len: usize = shape.iter().product();
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    let mut data = vec![0f64; len];
    LittleEndian::read_f64_into(&bytes, &mut data);
    ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&shape), data)
        .map_err(|e| ck(format!("tensor shape mismatch: {e}")))
}

fn write_params<W: Write>(w: &mut W, params: &[&Param]) -> Result<()> {
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for p in params {
        write_array(w, &p.value)?;
    }
    Ok(())
}

fn read_params_into<R: Read>(r: &mut R, params: Vec<&mut Param>) -> Result<()> {
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count != params.len() {
        return Err(ck(format!(
            "component has {} parameters, checkpoint stores {count}",
            params.len()
        )));
    }
    for p in params {
        let value = read_array(r)?;
        if value.shape() != p.value.shape() {
            return Err(ck(format!(
                "parameter shape {:?} does not match architecture {:?}",
                value.shape(),
                p.value.shape()
            )));
        }
        p.value = value;
    }
    Ok(())
}

fn write_adam<W: Write>(w: &mut W, opt: &AdamState) -> Result<()> {
    w.write_f64::<LittleEndian>(opt.beta1)?;
    w.write_f64::<LittleEndian>(opt.beta2)?;
    w.write_f64::<LittleEndian>(opt.eps)?;
    w.write_u64::<LittleEndian>(opt.t)?;
    w.write_u32::<LittleEndian>(opt.m.len() as u32)?;
    for m in &opt.m {
        write_array(w, m)?;
    }
    for v in &opt.v {
        write_array(w, v)?;
    }
    Ok(())
}

fn read_adam<R: Read>(r: &mut R) -> Result<AdamState> {
    let beta1 = r.read_f64::<LittleEndian>()?;
    let beta2 = r.read_f64::<LittleEndian>()?;
    let eps = r.read_f64::<LittleEndian>()?;
    let t = r.read_u64::<LittleEndian>()?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut m = Vec::with_capacity(n);
    for _ in 0..n {
        m.push(read_array(r)?);
    }
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(read_array(r)?);
    }
    Ok(AdamState { beta1, beta2, eps, t, m, v })
}

/// Writes a checkpoint; `state` is omitted for inference-only exports.
/// The file is written to a sibling temp path and renamed into place.
pub fn save_checkpoint(path: &Path, bundle: &ModelBundle, state: Option<&TrainState>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
        write_string(&mut w, &serde_json::to_string(&bundle.arch)?)?;
        write_string(&mut w, &serde_json::to_string(&bundle.registry)?)?;

        for id in bundle.registry.ids() {
            write_params(&mut w, &bundle.encoders[id].params())?;
        }
        for id in bundle.registry.ids() {
            write_params(&mut w, &bundle.decoders[id].params())?;
        }
        for id in bundle.registry.ids() {
            write_params(&mut w, &bundle.discriminators[id].params())?;
        }

        match state {
            Some(state) => {
                w.write_u8(1)?;
                w.write_u32::<LittleEndian>(state.epoch_next)?;
                w.write_u64::<LittleEndian>(state.seed)?;
                write_string(&mut w, &serde_json::to_string(&state.train_cfg)?)?;
                write_string(&mut w, &serde_json::to_string(&state.loss_cfg)?)?;
                write_adam(&mut w, &state.gen_opt)?;
                write_adam(&mut w, &state.disc_opt)?;
            }
            None => w.write_u8(0)?,
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(ModelBundle, Option<TrainState>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| ck(format!("cannot open `{}`: {e}", path.display())))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ck(format!("`{}` is not a checkpoint file", path.display())));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(ck(format!(
            "checkpoint schema version {version} does not match supported version {CHECKPOINT_VERSION}"
        )));
    }
    let arch: ArchConfig = serde_json::from_str(&read_string(&mut r)?)?;
    let registry: DomainRegistry = serde_json::from_str(&read_string(&mut r)?)?;

    // Deterministic construction then overwrite; seed is irrelevant here.
    let mut bundle = ModelBundle::new(arch, registry, 0)?;
    let ids: Vec<String> = bundle.registry.ids().map(str::to_string).collect();
    for id in &ids {
        read_params_into(&mut r, bundle.encoders.get_mut(id).unwrap().params_mut())?;
    }
    for id in &ids {
        read_params_into(&mut r, bundle.decoders.get_mut(id).unwrap().params_mut())?;
    }
    for id in &ids {
        read_params_into(&mut r, bundle.discriminators.get_mut(id).unwrap().params_mut())?;
    }

    let state = match r.read_u8()? {
        0 => None,
        1 => {
            let epoch_next = r.read_u32::<LittleEndian>()?;
            let seed = r.read_u64::<LittleEndian>()?;
            let train_cfg: TrainConfig = serde_json::from_str(&read_string(&mut r)?)?;
            let loss_cfg: LossConfig = serde_json::from_str(&read_string(&mut r)?)?;
            let gen_opt = read_adam(&mut r)?;
            let disc_opt = read_adam(&mut r)?;
            Some(TrainState { epoch_next, seed, train_cfg, loss_cfg, gen_opt, disc_opt })
        }
        other => return Err(ck(format!("invalid optimizer flag {other}"))),
    };
    Ok((bundle, state))
}

/// SHA-256 of a checkpoint file, recorded in output provenance sidecars.
pub fn checkpoint_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}
