//! `SVCK` checkpoint files.
//!
//! Layout (little-endian): magic `SVCK`, `u32` version, `u32` manifest length,
//! UTF-8 JSON manifest, then every tensor's values as `f64` in manifest order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::nn::Params;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    /// Free-form metadata (architecture, config copy).
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<CheckpointTensor>,
}

impl Checkpoint {
    pub fn new(seed: u64, step: u64) -> Self {
        Checkpoint {
            seed,
            step,
            meta: serde_json::Value::Null,
            tensors: Vec::new(),
        }
    }

    /// Appends every tensor of `params` under `prefix.`.
    pub fn push_params<T: Scalar, P: Params<T>>(&mut self, prefix: &str, params: &P) {
        for (name, t) in params.tensors() {
            self.tensors.push(CheckpointTensor {
                name: format!("{prefix}.{name}"),
                shape: vec![t.len()],
                values: t.iter().map(|x| x.as_f64()).collect(),
            });
        }
    }

    /// Copies stored tensors named `prefix.*` back into `params`.
    pub fn load_params<T: Scalar, P: Params<T>>(&self, prefix: &str, params: &mut P) -> Result<()> {
        let names: Vec<String> = params
            .tensors()
            .into_iter()
            .map(|(n, _)| format!("{prefix}.{n}"))
            .collect();
        for (name, dst) in names.iter().zip(params.tensors_mut()) {
            let src = self
                .tensors
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| SurvError::invalid(format!("checkpoint has no tensor `{name}`")))?;
            if src.values.len() != dst.len() {
                return Err(SurvError::dim(
                    format!("checkpoint tensor `{name}`"),
                    dst.len(),
                    src.values.len(),
                ));
            }
            for (d, &s) in dst.iter_mut().zip(&src.values) {
                *d = T::lit(s);
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CheckpointTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let manifest = serde_json::to_vec(self).map_err(std::io::Error::other)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(manifest.len() as u32).to_le_bytes())?;
        w.write_all(&manifest)?;
        for t in &self.tensors {
            for v in &t.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |m: &str| SurvError::invalid(format!("checkpoint: {m}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let version = read_u32(r).map_err(|_| bad("truncated header"))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let len = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
        let mut manifest = vec![0u8; len];
        r.read_exact(&mut manifest)
            .map_err(|_| bad("truncated manifest"))?;
        let mut ck: Checkpoint =
            serde_json::from_slice(&manifest).map_err(|e| bad(&e.to_string()))?;
        for t in &mut ck.tensors {
            let n: usize = t.shape.iter().product();
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)
                .map_err(|_| bad(&format!("truncated data for `{}`", t.name)))?;
            t.values = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| SurvError::io(path, e))?,
        );
        self.write_to(&mut f).map_err(|e| SurvError::io(path, e))?;
        f.flush().map_err(|e| SurvError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f =
            std::io::BufReader::new(std::fs::File::open(path).map_err(|e| SurvError::io(path, e))?);
        Self::read_from(&mut f)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_round_trips_through_bytes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::<f64>::new(&[3, 4, 2], 0.3, &mut rng).unwrap();
        let mut ck = Checkpoint::new(5, 17);
        ck.push_params("head.text", &mlp);
        ck.meta = serde_json::json!({"sizes": mlp.sizes()});
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SVCK");
        let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        let mut fresh = Mlp::<f64>::zeros(&[3, 4, 2]).unwrap();
        back.load_params("head.text", &mut fresh).unwrap();
        assert_eq!(fresh.layers, mlp.layers);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(Checkpoint::read_from(&mut &b"XXXX\x01\0\0\0"[..]).is_err());
        let mut ck = Checkpoint::new(0, 0);
        ck.push_params("g", &vec![1.0f64, 2.0]);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Checkpoint::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn missing_tensor_is_reported() {
        let ck = Checkpoint::new(0, 0);
        let mut p = vec![0.0f64];
        let err = ck.load_params("gates", &mut p).unwrap_err();
        assert!(err.to_string().contains("gates.values"));
    }
}
