//! Binary checkpoint: `MVAE`, format version (u32 LE), header length
//! (u32 LE), a JSON header, then every tensor as little-endian f32 in
//! header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

use super::model::{VaeConfig, VaeParams};
use super::vocab::Vocabulary;
use super::VaeError;

pub const MAGIC: &[u8; 4] = b"MVAE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: VaeConfig,
    vocabulary: Vocabulary,
    tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> VaeError {
    VaeError::Checkpoint(msg.into())
}

pub fn write_checkpoint(params: &VaeParams, mut w: impl Write) -> Result<(), VaeError> {
    let mut offset = 0;
    let tensors = params
        .names()
        .into_iter()
        .zip(&params.tensors)
        .map(|(name, t)| {
            let e = TensorEntry { name, shape: t.shape.clone(), offset };
            offset += 4 * t.len();
            e
        })
        .collect();
    let header = Header { config: params.config.clone(), vocabulary: params.vocab.clone(), tensors };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(offset);
    for t in &params.tensors {
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<VaeParams, VaeError> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
    header.config.validate()?;
    let specs = header.config.param_specs(header.vocabulary.len());
    if specs.len() != header.tensors.len() {
        return Err(bad("tensor list does not match the architecture"));
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut tensors = Vec::with_capacity(specs.len());
    for ((name, shape), entry) in specs.into_iter().zip(&header.tensors) {
        if entry.name != name || entry.shape != shape {
            return Err(bad(format!("tensor {} does not match expected {name} {shape:?}", entry.name)));
        }
        let len: usize = shape.iter().product();
        let bytes = data
            .get(entry.offset..entry.offset + 4 * len)
            .ok_or_else(|| bad(format!("tensor {name} runs past the end of the file")))?;
        let values = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        tensors.push(Tensor { shape, data: values });
    }
    Ok(VaeParams { config: header.config, vocab: header.vocabulary, tensors })
}

pub fn save(params: &VaeParams, path: &Path) -> Result<(), VaeError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<VaeParams, VaeError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
