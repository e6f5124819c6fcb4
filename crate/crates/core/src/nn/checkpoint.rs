//! Versioned binary model checkpoints: JSON config header plus
//! shape-tagged little-endian f32 tensors in parameter-visit order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::ParamVisit;
use super::model::{ModelConfig, Seq2Seq, UnitClassifier};
use super::NnError;

const MAGIC: &[u8; 4] = b"SWCK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_classes: Option<usize>,
}

fn write_tensors<M: ParamVisit>(file: &mut impl Write, model: &M) -> Result<(), NnError> {
    let params = model.params();
    file.write_all(&(params.len() as u32).to_le_bytes())?;
    for (i, p) in params.iter().enumerate() {
        let name = format!("t{i:04}");
        file.write_all(&(name.len() as u32).to_le_bytes())?;
        file.write_all(name.as_bytes())?;
        file.write_all(&2u32.to_le_bytes())?;
        file.write_all(&(p.rows as u32).to_le_bytes())?;
        file.write_all(&(p.cols as u32).to_le_bytes())?;
        for &v in &p.data {
            file.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::BadCheckpoint {
                path: self.path.clone(),
                reason: "truncated file".into(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn read_tensors<M: ParamVisit>(r: &mut Reader, model: &mut M) -> Result<(), NnError> {
    let n_tensors = r.u32()? as usize;
    let mut params = model.params_mut();
    if n_tensors != params.len() {
        return Err(NnError::BadCheckpoint {
            path: r.path.clone(),
            reason: format!("expected {} tensors, found {n_tensors}", params.len()),
        });
    }
    for p in params.iter_mut() {
        let name_len = r.u32()? as usize;
        r.take(name_len)?;
        let ndim = r.u32()?;
        if ndim != 2 {
            return Err(NnError::BadCheckpoint {
                path: r.path.clone(),
                reason: format!("unsupported rank {ndim}"),
            });
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if rows != p.rows || cols != p.cols {
            return Err(NnError::BadCheckpoint {
                path: r.path.clone(),
                reason: format!("shape ({rows}, {cols}) vs expected ({}, {})", p.rows, p.cols),
            });
        }
        let raw = r.take(rows * cols * 4)?;
        for (slot, chunk) in p.data.iter_mut().zip(raw.chunks_exact(4)) {
            *slot = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    Ok(())
}

fn write_checkpoint<M: ParamVisit>(
    path: &Path,
    header: &Header,
    model: &M,
) -> Result<(), NnError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    let header_json = serde_json::to_vec(header)
        .map_err(|e| NnError::InvalidConfig(format!("header serialization: {e}")))?;
    file.write_all(&(header_json.len() as u32).to_le_bytes())?;
    file.write_all(&header_json)?;
    write_tensors(&mut file, model)?;
    file.flush()?;
    Ok(())
}

/// Returns the parsed header and the byte offset where tensors begin.
fn open_checkpoint(path: &Path, bytes: &mut Vec<u8>) -> Result<(Header, usize), NnError> {
    std::fs::File::open(path)?.read_to_end(bytes)?;
    let mut r = Reader { bytes, pos: 0, path: path.display().to_string() };
    if r.take(4)? != MAGIC {
        return Err(NnError::BadCheckpoint {
            path: path.display().to_string(),
            reason: "missing SWCK magic".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::BadCheckpoint {
            path: path.display().to_string(),
            reason: format!("unsupported version {version}"),
        });
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| {
        NnError::BadCheckpoint { path: path.display().to_string(), reason: e.to_string() }
    })?;
    Ok((header, r.pos))
}

pub fn save_seq2seq(path: &Path, model: &Seq2Seq) -> Result<(), NnError> {
    let header =
        Header { kind: "seq2seq".into(), config: model.cfg.clone(), n_classes: None };
    write_checkpoint(path, &header, model)
}

pub fn load_seq2seq(path: &Path) -> Result<Seq2Seq, NnError> {
    let mut bytes = Vec::new();
    let (header, offset) = open_checkpoint(path, &mut bytes)?;
    if header.kind != "seq2seq" {
        return Err(NnError::BadCheckpoint {
            path: path.display().to_string(),
            reason: format!("kind '{}' is not seq2seq", header.kind),
        });
    }
    let mut model = Seq2Seq::new(&header.config, 0)?;
    let mut r = Reader { bytes: &bytes, pos: offset, path: path.display().to_string() };
    read_tensors(&mut r, &mut model)?;
    Ok(model)
}

pub fn save_unit_classifier(path: &Path, model: &UnitClassifier) -> Result<(), NnError> {
    let header = Header {
        kind: "unit_classifier".into(),
        config: model.cfg.clone(),
        n_classes: Some(model.n_classes),
    };
    write_checkpoint(path, &header, model)
}

pub fn load_unit_classifier(path: &Path) -> Result<UnitClassifier, NnError> {
    let mut bytes = Vec::new();
    let (header, offset) = open_checkpoint(path, &mut bytes)?;
    if header.kind != "unit_classifier" {
        return Err(NnError::BadCheckpoint {
            path: path.display().to_string(),
            reason: format!("kind '{}' is not unit_classifier", header.kind),
        });
    }
    let n_classes = header.n_classes.ok_or_else(|| NnError::BadCheckpoint {
        path: path.display().to_string(),
        reason: "missing n_classes".into(),
    })?;
    let mut model = UnitClassifier::new(&header.config, n_classes, 0)?;
    let mut r = Reader { bytes: &bytes, pos: offset, path: path.display().to_string() };
    read_tensors(&mut r, &mut model)?;
    Ok(model)
}
