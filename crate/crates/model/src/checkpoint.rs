//! Single-file checkpoint container: magic, JSON header (kind, config,
//! tensor manifest), then raw little-endian f32 data in manifest order.
//!
//! Headers are serialized from name-sorted maps, so identical parameters
//! produce byte-identical files.

use crate::error::{Error, Result};
use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"LUMI";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub struct Loaded {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

fn ck_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn save<C: Serialize>(
    path: &Path,
    kind: &str,
    config: &C,
    tensors: &BTreeMap<String, Tensor>,
) -> Result<()> {
    let entries: Vec<TensorEntry> = tensors
        .iter()
        .map(|(name, t)| TensorEntry {
            name: name.clone(),
            shape: t.dims().to_vec(),
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        config: serde_json::to_value(config).map_err(lumiforge_core::Error::from)?,
        tensors: entries,
    };
    let header_bytes = serde_json::to_vec(&header).map_err(lumiforge_core::Error::from)?;

    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ck_err(path, e.to_string()))?;
    }
    let file = std::fs::File::create(path).map_err(|e| ck_err(path, e.to_string()))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| ck_err(path, e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&header_bytes).map_err(io)?;
    for t in tensors.values() {
        let flat = t
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?;
        let mut bytes = Vec::with_capacity(flat.len() * 4);
        for v in flat {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn load(path: &Path, device: &Device) -> Result<Loaded> {
    let file = std::fs::File::open(path).map_err(|e| ck_err(path, e.to_string()))?;
    let mut r = std::io::BufReader::new(file);
    let io = |e: std::io::Error| ck_err(path, e.to_string());

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(ck_err(path, "bad magic; not a checkpoint file"));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes).map_err(io)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes).map_err(io)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| ck_err(path, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ck_err(
            path,
            format!("unsupported format version {}", header.format_version),
        ));
    }

    let mut tensors = BTreeMap::new();
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes).map_err(io)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::from_vec(data, entry.shape.as_slice(), device)?;
        tensors.insert(entry.name.clone(), t);
    }
    // trailing bytes mean corruption or a mismatched manifest
    let mut extra = [0u8; 1];
    match r.read(&mut extra).map_err(io)? {
        0 => {}
        _ => return Err(ck_err(path, "trailing data after last tensor")),
    }
    Ok(Loaded {
        kind: header.kind,
        config: header.config,
        tensors,
    })
}

/// Loads and checks the expected kind, deserializing the config.
pub fn load_as<C: for<'de> Deserialize<'de>>(
    path: &Path,
    kind: &str,
    device: &Device,
) -> Result<(C, BTreeMap<String, Tensor>)> {
    let loaded = load(path, device)?;
    if loaded.kind != kind {
        return Err(ck_err(
            path,
            format!("kind mismatch: expected {kind}, found {}", loaded.kind),
        ));
    }
    let config: C = serde_json::from_value(loaded.config)
        .map_err(|e| ck_err(path, format!("config: {e}")))?;
    Ok((config, loaded.tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct ToyConfig {
        width: usize,
    }

    fn toy_tensors(device: &Device) -> BTreeMap<String, Tensor> {
        let mut m = BTreeMap::new();
        m.insert(
            "b.weight".to_string(),
            Tensor::from_vec(vec![1.5f32, -2.0, 0.25], &[3], device).unwrap(),
        );
        m.insert(
            "a.weight".to_string(),
            Tensor::from_vec(vec![0.5f32, 4.0, -1.0, 8.0], &[2, 2], device).unwrap(),
        );
        m
    }

    #[test]
    fn round_trip_exact() {
        let dev = Device::Cpu;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ckpt");
        let tensors = toy_tensors(&dev);
        save(&path, "toy", &ToyConfig { width: 2 }, &tensors).unwrap();

        let (config, loaded) = load_as::<ToyConfig>(&path, "toy", &dev).unwrap();
        assert_eq!(config, ToyConfig { width: 2 });
        assert_eq!(loaded.len(), 2);
        for (name, t) in &tensors {
            let a = t.flatten_all().unwrap().to_vec1::<f32>().unwrap();
            let b = loaded[name].flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert_eq!(a, b);
            assert_eq!(t.dims(), loaded[name].dims());
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dev = Device::Cpu;
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        save(&a, "toy", &ToyConfig { width: 2 }, &toy_tensors(&dev)).unwrap();
        save(&b, "toy", &ToyConfig { width: 2 }, &toy_tensors(&dev)).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn kind_mismatch_and_corruption_detected() {
        let dev = Device::Cpu;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ckpt");
        save(&path, "toy", &ToyConfig { width: 2 }, &toy_tensors(&dev)).unwrap();
        assert!(load_as::<ToyConfig>(&path, "codec", &dev).is_err());

        // appending garbage must be detected
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 8]);
        std::fs::write(&path, bytes).unwrap();
        assert!(load(&path, &dev).is_err());

        std::fs::write(&path, b"nope").unwrap();
        assert!(load(&path, &dev).is_err());
    }
}
