//! Self-describing model checkpoints.
//!
//! ```text
//! magic "CKMODEL\0" | version u32 | seed u64
//! config json | relations json | meta json      (each: len u64, utf-8 bytes)
//! num_tensors u64 | per tensor: name (len u64, bytes), rows u64, cols u64, f64 × rows·cols
//! ```
//! Everything is little-endian; floats are stored as their IEEE bit patterns.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, ModelParams};
use super::NnError;

const MAGIC: &[u8; 8] = b"CKMODEL\0";
pub const VERSION: u32 = 1;
const MAX_STRING: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub seed: u64,
    /// Relation names by id, for vocabulary checks at load time.
    pub relations: Vec<String>,
    /// Free-form run settings.
    pub meta: serde_json::Value,
}

fn bad<E: std::fmt::Display>(e: E) -> NnError {
    NnError::Checkpoint(e.to_string())
}

fn write_bytes<W: Write>(w: &mut W, b: &[u8]) -> std::io::Result<()> {
    w.write_u64::<LE>(b.len() as u64)?;
    w.write_all(b)
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>, NnError> {
    let n = r.read_u64::<LE>().map_err(bad)?;
    if n > MAX_STRING {
        return Err(bad(format!("field of {n} bytes")));
    }
    let mut b = vec![0u8; n as usize];
    r.read_exact(&mut b).map_err(bad)?;
    Ok(b)
}

impl Checkpoint {
    pub fn encode<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        let go = |w: &mut W| -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            w.write_u32::<LE>(VERSION)?;
            w.write_u64::<LE>(self.seed)?;
            write_bytes(w, &json(&self.config))?;
            write_bytes(w, &json(&self.relations))?;
            write_bytes(w, &json(&self.meta))?;
            let named = self.params.named();
            w.write_u64::<LE>(named.len() as u64)?;
            for (name, t) in named {
                write_bytes(w, name.as_bytes())?;
                w.write_u64::<LE>(t.rows as u64)?;
                w.write_u64::<LE>(t.cols as u64)?;
                for &v in &t.data {
                    w.write_u64::<LE>(v.to_bits())?;
                }
            }
            Ok(())
        };
        go(w).map_err(bad)
    }

    pub fn decode<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(bad("not a model checkpoint"));
        }
        let version = r.read_u32::<LE>().map_err(bad)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let seed = r.read_u64::<LE>().map_err(bad)?;
        let config: ModelConfig = serde_json::from_slice(&read_bytes(r)?).map_err(bad)?;
        let relations: Vec<String> = serde_json::from_slice(&read_bytes(r)?).map_err(bad)?;
        let meta: serde_json::Value = serde_json::from_slice(&read_bytes(r)?).map_err(bad)?;
        let mut params = ModelParams::zeros(&config);
        let n = r.read_u64::<LE>().map_err(bad)? as usize;
        let mut slots = params.named_mut();
        if n != slots.len() {
            return Err(bad(format!("{n} tensors, expected {}", slots.len())));
        }
        for (want, t) in slots.iter_mut() {
            let name = String::from_utf8(read_bytes(r)?).map_err(bad)?;
            if name != *want {
                return Err(bad(format!("found tensor {name}, expected {want}")));
            }
            let rows = r.read_u64::<LE>().map_err(bad)? as usize;
            let cols = r.read_u64::<LE>().map_err(bad)? as usize;
            if (rows, cols) != t.shape() {
                return Err(bad(format!(
                    "{name} is {rows}×{cols}, config implies {}×{}",
                    t.rows, t.cols
                )));
            }
            for v in t.data.iter_mut() {
                *v = f64::from_bits(r.read_u64::<LE>().map_err(bad)?);
            }
        }
        drop(slots);
        Ok(Self {
            config,
            params,
            seed,
            relations,
            meta,
        })
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("plain data serializes")
}

pub fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), NnError> {
    let io = |source| NnError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    ck.encode(&mut w)?;
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let file = fs::File::open(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::decode(&mut BufReader::new(file))
}
