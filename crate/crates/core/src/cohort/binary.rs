//! `SVHS` (token hidden states) and `SVPV` (pooled vectors) files.
//!
//! Layout, all integers little-endian `u32`: magic, version, sample count,
//! then per sample the id length and UTF-8 id, the shape (`L, d` or `d`)
//! and row-major `f32` values.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SurvError};
use crate::pooling::HiddenStateMatrix;

pub const HIDDEN_MAGIC: &[u8; 4] = b"SVHS";
pub const POOLED_MAGIC: &[u8; 4] = b"SVPV";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on any single length field, to fail fast on corrupt input.
const MAX_LEN: u32 = 1 << 28;

fn corrupt(path: &Path, msg: impl Into<String>) -> SurvError {
    SurvError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: msg.into(),
    }
}

struct Reader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => corrupt(self.path, "truncated file"),
                _ => SurvError::io(self.path, e),
            })?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4)?;
        let v = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if v > MAX_LEN {
            return Err(corrupt(self.path, format!("implausible {what} {v}")));
        }
        Ok(v)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<usize> {
        let m = self.bytes(4)?;
        if m != magic {
            return Err(corrupt(
                self.path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&m),
                    std::str::from_utf8(magic).unwrap()
                ),
            ));
        }
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(corrupt(self.path, format!("unsupported version {version}")));
        }
        Ok(self.u32("sample count")? as usize)
    }

    fn id(&mut self) -> Result<String> {
        let n = self.u32("id length")? as usize;
        String::from_utf8(self.bytes(n)?).map_err(|_| corrupt(self.path, "sample id is not UTF-8"))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.bytes(n * 4)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut extra = [0u8; 1];
        match self.inner.read(&mut extra) {
            Ok(0) => Ok(()),
            Ok(_) => Err(corrupt(self.path, "trailing bytes after last sample")),
            Err(e) => Err(SurvError::io(self.path, e)),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    Ok(BufReader::new(
        std::fs::File::open(path).map_err(|e| SurvError::io(path, e))?,
    ))
}

pub fn read_hidden_states(path: &Path) -> Result<Vec<HiddenStateMatrix<f32>>> {
    let mut r = Reader {
        inner: open(path)?,
        path,
    };
    let count = r.header(HIDDEN_MAGIC)?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.id()?;
        let rows = r.u32("token count")? as usize;
        let cols = r.u32("hidden width")? as usize;
        let values = r.floats(rows * cols)?;
        out.push(
            HiddenStateMatrix::new(id.clone(), rows, cols, values)
                .map_err(|e| corrupt(path, format!("sample `{id}`: {e}")))?,
        );
    }
    r.expect_eof()?;
    Ok(out)
}

pub fn read_pooled(path: &Path) -> Result<Vec<(String, Vec<f32>)>> {
    let mut r = Reader {
        inner: open(path)?,
        path,
    };
    let count = r.header(POOLED_MAGIC)?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.id()?;
        let d = r.u32("vector length")? as usize;
        out.push((id, r.floats(d)?));
    }
    r.expect_eof()?;
    Ok(out)
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "length exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_floats<W: Write>(w: &mut W, vs: &[f32]) -> std::io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_hidden_states(path: &Path, samples: &[&HiddenStateMatrix<f32>]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| SurvError::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        w.write_all(HIDDEN_MAGIC)?;
        put_u32(&mut w, FORMAT_VERSION as usize)?;
        put_u32(&mut w, samples.len())?;
        for h in samples {
            put_u32(&mut w, h.id.len())?;
            w.write_all(h.id.as_bytes())?;
            put_u32(&mut w, h.rows)?;
            put_u32(&mut w, h.cols)?;
            put_floats(&mut w, &h.values)?;
        }
        w.flush()
    })();
    res.map_err(|e| SurvError::io(path, e))
}

pub fn write_pooled(path: &Path, samples: &[(&str, &[f32])]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| SurvError::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        w.write_all(POOLED_MAGIC)?;
        put_u32(&mut w, FORMAT_VERSION as usize)?;
        put_u32(&mut w, samples.len())?;
        for (id, v) in samples {
            put_u32(&mut w, id.len())?;
            w.write_all(id.as_bytes())?;
            put_u32(&mut w, v.len())?;
            put_floats(&mut w, v)?;
        }
        w.flush()
    })();
    res.map_err(|e| SurvError::io(path, e))
}
