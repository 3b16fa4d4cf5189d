//! Named-tensor checkpoints.
//!
//! `params.bin` holds the magic `LOPSCKP1`, a little-endian `u32` tensor
//! count and, per tensor, the name (`u32` length + UTF-8), the rank (`u32`),
//! each dimension (`u64`) and the values as `f64` little-endian.
//! `manifest.txt` holds `key=value` lines describing the model.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::AutogradError;

pub const MAGIC: &[u8; 8] = b"LOPSCKP1";
pub const TENSOR_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub type Manifest = BTreeMap<String, String>;

fn bad(msg: impl Into<String>) -> AutogradError {
    AutogradError::CheckpointMismatch(msg.into())
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(&str, &Tensor)]) -> Result<(), AutogradError> {
    w.write_all(MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], AutogradError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => bad("truncated tensor file"),
        _ => e.into(),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize, AutogradError> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, AutogradError> {
    if &read_array::<8, _>(&mut r)? != MAGIC {
        return Err(bad("not a checkpoint tensor file"));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = read_u32(&mut r)?;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| bad("truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = read_u32(&mut r)?;
        let shape: Vec<usize> =
            (0..rank).map(|_| read_array::<8, _>(&mut r).map(|b| u64::from_le_bytes(b) as usize)).collect::<Result<_, _>>()?;
        let numel: usize = shape.iter().product();
        let data: Vec<f64> =
            (0..numel).map(|_| read_array::<8, _>(&mut r).map(f64::from_le_bytes)).collect::<Result<_, _>>()?;
        out.push((name, Tensor::new(&shape, data)?));
    }
    Ok(out)
}

pub fn format_manifest(manifest: &Manifest) -> String {
    manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_manifest(text: &str) -> Result<Manifest, AutogradError> {
    let mut out = Manifest::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("manifest line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Writes every parameter of `store` plus `manifest` into `dir`.
pub fn save(dir: &Path, store: &ParamStore, manifest: &Manifest) -> Result<(), AutogradError> {
    fs::create_dir_all(dir)?;
    let tensors: Vec<(&str, &Tensor)> = store.iter().map(|(_, p)| (p.name.as_str(), &p.value)).collect();
    let file = io::BufWriter::new(fs::File::create(dir.join(TENSOR_FILE))?);
    write_tensors(file, &tensors)?;
    fs::write(dir.join(MANIFEST_FILE), format_manifest(manifest))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, AutogradError> {
    parse_manifest(&fs::read_to_string(dir.join(MANIFEST_FILE))?)
}

/// Loads values into an existing store. Names and shapes must match exactly.
pub fn load_into(dir: &Path, store: &mut ParamStore) -> Result<Manifest, AutogradError> {
    let manifest = read_manifest(dir)?;
    let tensors = read_tensors(io::BufReader::new(fs::File::open(dir.join(TENSOR_FILE))?))?;
    if tensors.len() != store.len() {
        return Err(bad(format!("checkpoint has {} tensors, model has {}", tensors.len(), store.len())));
    }
    for ((name, t), p) in tensors.into_iter().zip(store.iter_mut()) {
        if name != p.name || t.shape() != p.value.shape() {
            return Err(bad(format!("tensor {name} {:?} does not match {} {:?}", t.shape(), p.name, p.value.shape())));
        }
        p.value = t;
    }
    Ok(manifest)
}
