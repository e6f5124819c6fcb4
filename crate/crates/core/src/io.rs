//! On-disk formats: raw IQ/real sample files with sidecar manifests, and
//! the binary feature table.
//!
//! IQ files are little-endian 32-bit float pairs (I, Q) interleaved; real
//! series are the single-column variant, flagged in the sidecar manifest
//! `<file>.json`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isolate::{MotionTrace, TraceProvenance};
use crate::signal::{IqRecording, RealSeries};

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Iq,
    Real,
}

/// Sidecar manifest stored next to each sample file as `<file>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub kind: SampleKind,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub channel: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps_s: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn write_f32_le(path: &Path, values: impl Iterator<Item = f32>) -> Result<(), IoError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in values {
        file.write_all(&v.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

fn read_f32_le(path: &Path) -> Result<Vec<f32>, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            reason: format!("length {} not a multiple of 4", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn read_sidecar(path: &Path) -> Result<Sidecar, IoError> {
    let sc = sidecar_path(path);
    let text = std::fs::read_to_string(&sc)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_iq(path: &Path, iq: &IqRecording) -> Result<(), IoError> {
    write_f32_le(
        path,
        iq.samples.iter().flat_map(|s| [s.re as f32, s.im as f32]),
    )?;
    let sidecar = Sidecar {
        format_version: SIDECAR_VERSION,
        kind: SampleKind::Iq,
        sample_rate_hz: iq.sample_rate_hz,
        t0_s: iq.t0_s,
        channel: "rx0".into(),
        gaps_s: Vec::new(),
        provenance: None,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_iq(path: &Path) -> Result<IqRecording, IoError> {
    let sidecar = read_sidecar(path)?;
    if sidecar.kind != SampleKind::Iq {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            reason: "sidecar kind is not iq".into(),
        });
    }
    let raw = read_f32_le(path)?;
    if raw.len() % 2 != 0 {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            reason: "odd sample count for interleaved IQ".into(),
        });
    }
    let samples = raw
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
        .collect();
    Ok(IqRecording { samples, sample_rate_hz: sidecar.sample_rate_hz, t0_s: sidecar.t0_s })
}

/// Write a real series with optional gap intervals and provenance metadata.
pub fn write_real_with(
    path: &Path,
    series: &RealSeries,
    gaps_s: &[(f64, f64)],
    provenance: Option<serde_json::Value>,
) -> Result<(), IoError> {
    write_f32_le(path, series.values.iter().map(|&v| v as f32))?;
    let sidecar = Sidecar {
        format_version: SIDECAR_VERSION,
        kind: SampleKind::Real,
        sample_rate_hz: series.sample_rate_hz,
        t0_s: 0.0,
        channel: "trace".into(),
        gaps_s: gaps_s.to_vec(),
        provenance,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn write_real(path: &Path, series: &RealSeries) -> Result<(), IoError> {
    write_real_with(path, series, &[], None)
}

pub fn read_real_with(path: &Path) -> Result<(RealSeries, Sidecar), IoError> {
    let sidecar = read_sidecar(path)?;
    if sidecar.kind != SampleKind::Real {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            reason: "sidecar kind is not real".into(),
        });
    }
    let values = read_f32_le(path)?.into_iter().map(|v| v as f64).collect();
    Ok((RealSeries::new(values, sidecar.sample_rate_hz), sidecar))
}

pub fn read_real(path: &Path) -> Result<RealSeries, IoError> {
    read_real_with(path).map(|(s, _)| s)
}

/// Write a motion trace: values as a real series, gaps and provenance in
/// the sidecar manifest.
pub fn write_trace(path: &Path, trace: &MotionTrace) -> Result<(), IoError> {
    let provenance = serde_json::to_value(&trace.provenance).ok();
    write_real_with(path, &trace.values, &trace.gaps, provenance)
}

pub fn read_trace(path: &Path) -> Result<MotionTrace, IoError> {
    let (values, sidecar) = read_real_with(path)?;
    let provenance = sidecar
        .provenance
        .and_then(|v| serde_json::from_value::<TraceProvenance>(v).ok())
        .unwrap_or_default();
    Ok(MotionTrace { values, gaps: sidecar.gaps_s, provenance })
}

const FEATURE_MAGIC: &[u8; 4] = b"SWFT";

/// Row-major f64 matrix with a magic/version/shape header; row metadata goes
/// in the sidecar manifest.
pub fn write_feature_table(
    path: &Path,
    rows: &[Vec<f64>],
    row_manifest: Option<serde_json::Value>,
) -> Result<(), IoError> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(FEATURE_MAGIC)?;
    file.write_all(&1u32.to_le_bytes())?;
    file.write_all(&(rows.len() as u32).to_le_bytes())?;
    file.write_all(&(cols as u32).to_le_bytes())?;
    for row in rows {
        debug_assert_eq!(row.len(), cols);
        for v in row {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    if let Some(manifest) = row_manifest {
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok(())
}

pub fn read_feature_table(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let malformed = |reason: &str| IoError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 16 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(malformed("missing SWFT header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let need = 16 + rows * cols * 8;
    if bytes.len() != need {
        return Err(malformed(&format!("expected {need} bytes, got {}", bytes.len())));
    }
    let mut data = bytes[16..].chunks_exact(8).map(|c| {
        f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
    });
    Ok((0..rows)
        .map(|_| (0..cols).map(|_| data.next().unwrap()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iq_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        let iq = IqRecording::new(
            (0..64).map(|k| Complex64::new(k as f64 * 0.5, -(k as f64))).collect(),
            20_000.0,
        );
        write_iq(&path, &iq).unwrap();
        let back = read_iq(&path).unwrap();
        assert_eq!(back.len(), iq.len());
        assert_eq!(back.sample_rate_hz, iq.sample_rate_hz);
        for (a, b) in iq.samples.iter().zip(&back.samples) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn real_roundtrip_with_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        let series = RealSeries::new(vec![0.25, -0.5, 1.0], 1000.0);
        write_real_with(&path, &series, &[(0.1, 0.2)], None).unwrap();
        let (back, sidecar) = read_real_with(&path).unwrap();
        assert_eq!(back.values, series.values);
        assert_eq!(sidecar.gaps_s, vec![(0.1, 0.2)]);
    }

    #[test]
    fn feature_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let rows = vec![vec![1.0, 2.5, -3.0], vec![0.0, 1e-12, 7.0]];
        write_feature_table(&path, &rows, None).unwrap();
        assert_eq!(read_feature_table(&path).unwrap(), rows);
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        let series = RealSeries::new(vec![1.0], 10.0);
        write_real(&path, &series).unwrap();
        assert!(read_iq(&path).is_err());
    }
}
