//! Flat binary checkpoints.
//!
//! Layout (little endian): magic `NLMLPCKP`, `u32` version, `u32` layer
//! count, then per layer `u64` fan-in, `u64` fan-out, the row-major weights
//! and the biases as `f64`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Dense, MlpModel};
use crate::error::{Error, ParseLocation, Result};

const MAGIC: &[u8; 8] = b"NLMLPCKP";
const VERSION: u32 = 1;

pub fn encode(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.fan_in() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.fan_out() as u64).to_le_bytes());
        for w in layer.weights.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Parse {
                path: self.path.to_path_buf(),
                location: ParseLocation::Byte(self.pos as u64),
                message: "truncated checkpoint".into(),
            })?;
        self.pos += n;
        Ok(chunk)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<MlpModel> {
    let bad = |at: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: ParseLocation::Byte(at as u64),
        message,
    };
    let mut cur = Cursor {
        path,
        bytes,
        pos: 0,
    };
    if cur.take(8)? != MAGIC {
        return Err(bad(0, "not a noisyloss checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(bad(8, format!("unsupported checkpoint version {version}")));
    }
    let n_layers = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let fan_in = cur.u64()? as usize;
        let fan_out = cur.u64()? as usize;
        let weights = Array2::from_shape_vec((fan_in, fan_out), cur.f64s(fan_in * fan_out)?)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let bias = Array1::from(cur.f64s(fan_out)?);
        layers.push(Dense { weights, bias });
    }
    if cur.pos != bytes.len() {
        return Err(bad(cur.pos, "trailing bytes after last layer".into()));
    }
    MlpModel::from_layers(layers)
}

pub fn save(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
