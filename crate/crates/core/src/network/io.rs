//! Model files.
//!
//! Binary layout, all little-endian: magic `DDNN`, u32 version, u32 input
//! dim, u32 depth; per layer u32 in, u32 out, then W (out x in, row-major),
//! b_enc (out) and b_dec (in) as f64; then the output unit's weights and
//! bias. A JSON sidecar next to the model records how it was trained.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{LayerWeights, NetworkStack, OutputUnit, TrainConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DDNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub config: TrainConfig,
    pub seed: u64,
    /// Path of the normalizer the model's inputs must be scaled with.
    pub normalizer: Option<String>,
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(stack: &NetworkStack) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, stack.input_dim);
    put_u32(&mut out, stack.depth());
    for l in &stack.layers {
        put_u32(&mut out, l.in_dim());
        put_u32(&mut out, l.out_dim());
        put_f64s(&mut out, l.w.iter());
        put_f64s(&mut out, l.b_enc.iter());
        put_f64s(&mut out, l.b_dec.iter());
    }
    put_f64s(&mut out, stack.output.w.iter());
    put_f64s(&mut out, std::iter::once(&stack.output.b));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format("model file is truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("model dims overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<NetworkStack> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let input_dim = c.u32()?;
    let depth = c.u32()?;
    if depth == 0 || depth > super::MAX_DEPTH {
        return Err(Error::Format(format!("model depth {depth} out of range")));
    }
    let mut layers = Vec::with_capacity(depth);
    let mut prev = input_dim;
    for _ in 0..depth {
        let (i, o) = (c.u32()?, c.u32()?);
        if i != prev || o == 0 {
            return Err(Error::Format("inconsistent layer dimensions".into()));
        }
        let w = Array2::from_shape_vec((o, i), c.f64s(o * i)?).map_err(|e| Error::Format(e.to_string()))?;
        let b_enc = Array1::from(c.f64s(o)?);
        let b_dec = Array1::from(c.f64s(i)?);
        layers.push(LayerWeights { w, b_enc, b_dec });
        prev = o;
    }
    let w = Array1::from(c.f64s(prev)?);
    let b = c.f64s(1)?[0];
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    let mut stack = NetworkStack::from_layers(layers, 0)?;
    stack.output = OutputUnit { w, b };
    Ok(stack)
}

pub fn save_model(path: impl AsRef<Path>, stack: &NetworkStack, info: &ModelInfo) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(stack)).map_err(|e| Error::from(e).at(path))?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(info)?).map_err(|e| Error::from(e).at(&side))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkStack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_model(&bytes).map_err(|e| e.at(path))
}

pub fn load_model_info(path: impl AsRef<Path>) -> Result<ModelInfo> {
    let side = sidecar_path(path.as_ref());
    let text = std::fs::read_to_string(&side).map_err(|e| Error::from(e).at(&side))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).at(&side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_layer;

    fn stack() -> NetworkStack {
        NetworkStack::from_layers(vec![init_layer(5, 4, 1), init_layer(4, 3, 2)], 9).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let s = stack();
        let back = decode_model(&encode_model(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode_model(&stack());
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_model(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
        let mut ver = bytes;
        ver[4] = 9;
        assert!(decode_model(&ver).is_err());
    }

    #[test]
    fn files_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ddnn");
        let info = ModelInfo {
            config: TrainConfig::default(),
            seed: 4,
            normalizer: Some("norm.csv".into()),
            scheme: Some("S2".into()),
            source: None,
            target: None,
        };
        save_model(&p, &stack(), &info).unwrap();
        assert_eq!(load_model(&p).unwrap(), stack());
        assert_eq!(load_model_info(&p).unwrap(), info);
        assert!(sidecar_path(&p).ends_with("m.ddnn.json"));
        assert!(load_model(dir.path().join("missing")).is_err());
    }
}
