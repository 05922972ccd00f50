//! Versioned binary container of named tensors plus a JSON config snapshot.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        8 bytes   "CSATCKPT"
//! version      u32       currently 1
//! kind         u32 len + UTF-8 bytes   ("sentiment", "blstm", "svr", ...)
//! config       u32 len + UTF-8 JSON
//! n_tensors    u32
//! per tensor:
//!   name       u32 len + UTF-8 bytes
//!   ndim       u32
//!   dims       ndim x u64
//!   data       prod(dims) x f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CSATCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_str(&mut w, &self.kind)?;
        write_str(&mut w, &self.config.to_string())?;
        w.write_u32::<LittleEndian>(self.tensors.len() as u32)?;
        for t in &self.tensors {
            write_str(&mut w, &t.name)?;
            w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
            for &d in &t.shape {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            for &v in &t.data {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let io = |e: std::io::Error| e.to_string();
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err("bad magic; not a checkpoint".into());
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let kind = read_str(&mut r).map_err(io)?;
        let config_text = read_str(&mut r).map_err(io)?;
        let config = serde_json::from_str(&config_text).map_err(|e| e.to_string())?;
        let n = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = read_str(&mut r).map_err(io)?;
            let ndim = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.read_u64::<LittleEndian>().map_err(io)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = vec![0.0; len];
            r.read_f64_into::<LittleEndian>(&mut data).map_err(io)?;
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Checkpoint {
            kind,
            config,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(BufReader::new(f)).map_err(|m| Error::format(path, m))
    }

    /// Loads and checks the `kind` tag.
    pub fn load_kind(path: &Path, kind: &str) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        if ck.kind != kind {
            return Err(Error::format(
                path,
                format!("checkpoint holds a `{}` model, expected `{kind}`", ck.kind),
            ));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let ck = Checkpoint {
            kind: "test".into(),
            config: serde_json::json!({"hidden": 3, "lr": 0.001}),
            tensors: vec![
                Tensor {
                    name: "a.w".into(),
                    shape: vec![2, 2],
                    data: vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300],
                },
                Tensor {
                    name: "a.b".into(),
                    shape: vec![0],
                    data: vec![],
                },
            ],
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.tensors[0].data[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(Checkpoint::read_from(&b"NOTACKPTxxxx"[..]).is_err());
        let ck = Checkpoint {
            kind: "k".into(),
            config: serde_json::json!({}),
            tensors: vec![Tensor {
                name: "t".into(),
                shape: vec![3],
                data: vec![1.0, 2.0, 3.0],
            }],
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(Checkpoint::read_from(&buf[..]).is_err());
    }
}
