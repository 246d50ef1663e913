//! On-disk formats.
//!
//! An instance is a JSON header plus two sidecar files holding the clean and
//! corrupted `n x d` matrices as little-endian `f64`, row-major. Sidecar names
//! are stored relative to the header's directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::{Adversary, ProblemInstance};
use crate::pipeline::RecoveryReport;
use crate::subspace::{GaussianModel, IndexSet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelHeader {
    pub mean: Vec<f64>,
    /// `k` rows of length `d`.
    pub factor: Vec<Vec<f64>>,
    pub coord_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceHeader {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub seed: u64,
    pub adversary: Adversary,
    pub model: ModelHeader,
    /// 1-based indices, one list per row.
    pub supports: Vec<Vec<usize>>,
    pub clean_file: String,
    pub corrupted_file: String,
}

pub fn sidecar_path(json: &Path, tag: &str) -> PathBuf {
    json.with_extension(format!("{tag}.f64"))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_all(&m[(r, c)].to_le_bytes()).map_err(|e| IoError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    if bytes.len() != rows * cols * 8 {
        return Err(IoError::format(path, format!("expected {} bytes for {rows}x{cols}, found {}", rows * cols * 8, bytes.len())));
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IoError::Json { path: path.to_path_buf(), source: e })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| IoError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json { path: path.to_path_buf(), source: e })
}

/// Writes the header to `json` and the matrices to `<stem>.clean.f64` and
/// `<stem>.corrupted.f64` next to it.
pub fn write_instance(json: &Path, inst: &ProblemInstance) -> Result<(), IoError> {
    let clean_path = sidecar_path(json, "clean");
    let corrupted_path = sidecar_path(json, "corrupted");
    write_matrix(&clean_path, &inst.clean)?;
    write_matrix(&corrupted_path, &inst.corrupted)?;
    let factor = inst.model.factor();
    let header = InstanceHeader {
        version: FORMAT_VERSION,
        n: inst.n(),
        d: inst.d(),
        k: inst.model.rank(),
        s: inst.s(),
        seed: inst.seed,
        adversary: inst.adversary,
        model: ModelHeader {
            mean: inst.model.mean().to_vec(),
            factor: (0..factor.nrows()).map(|r| factor.row(r).iter().cloned().collect()).collect(),
            coord_bound: inst.model.coord_bound(),
        },
        supports: inst.supports.iter().map(|s| s.elements().to_vec()).collect(),
        clean_file: file_name(&clean_path),
        corrupted_file: file_name(&corrupted_path),
    };
    write_json(json, &header)
}

pub fn read_instance(json: &Path) -> Result<ProblemInstance, IoError> {
    let h: InstanceHeader = read_json(json)?;
    if h.version != FORMAT_VERSION {
        return Err(IoError::format(json, format!("unsupported version {}", h.version)));
    }
    let dir = json.parent().unwrap_or(Path::new("."));
    let clean = read_matrix(&dir.join(&h.clean_file), h.n, h.d)?;
    let corrupted = read_matrix(&dir.join(&h.corrupted_file), h.n, h.d)?;
    if h.model.factor.len() != h.k || h.model.factor.iter().any(|r| r.len() != h.d) {
        return Err(IoError::format(json, "factor shape does not match k x d"));
    }
    let flat: Vec<f64> = h.model.factor.iter().flatten().cloned().collect();
    let model = GaussianModel::new(h.model.mean, DMatrix::from_row_slice(h.k, h.d, &flat))
        .map_err(|e| IoError::format(json, e.to_string()))?;
    if h.supports.len() != h.n {
        return Err(IoError::format(json, "one support per row required"));
    }
    let supports = h
        .supports
        .into_iter()
        .map(|s| IndexSet::new(s, h.d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| IoError::format(json, e.to_string()))?;
    let subspace = if model.mean().iter().all(|&m| m == 0.0) { model.subspace() } else { model.subspace_with_mean() };
    Ok(ProblemInstance { model, subspace, clean, supports, corrupted, adversary: h.adversary, seed: h.seed })
}

/// Writes the report's scalars to `json` and the estimates to
/// `<stem>.estimates.f64`.
pub fn write_report(json: &Path, report: &RecoveryReport) -> Result<(), IoError> {
    let estimates = sidecar_path(json, "estimates");
    write_matrix(&estimates, &report.estimates)?;
    #[derive(Serialize)]
    struct Out<'a> {
        version: u32,
        #[serde(flatten)]
        summary: crate::pipeline::ReportSummary,
        estimates_file: &'a str,
    }
    let name = file_name(&estimates);
    write_json(json, &Out { version: FORMAT_VERSION, summary: report.summary(), estimates_file: &name })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_model, rng_for, sample_instance};

    #[test]
    fn instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut mean = vec![0.0; 7];
        mean[2] = 1.5;
        let base = random_model(&mut rng_for(1, 0), 7, 2, 1.0).unwrap();
        let model = GaussianModel::new(mean, base.factor().clone()).unwrap();
        let inst = sample_instance(&model, 6, 2, Adversary::RandomSign { bound: 0.5 }, 42).unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&path, &inst).unwrap();
        assert!(dir.path().join("inst.clean.f64").exists());
        assert!(dir.path().join("inst.corrupted.f64").exists());
        let back = read_instance(&path).unwrap();
        assert_eq!(back.clean, inst.clean);
        assert_eq!(back.corrupted, inst.corrupted);
        assert_eq!(back.supports, inst.supports);
        assert_eq!(back.seed, 42);
        assert_eq!(back.adversary, inst.adversary);
        assert_eq!(back.model.mean(), inst.model.mean());
    }

    #[test]
    fn matrix_layout_is_row_major_le() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.f64");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        write_matrix(&p, &m).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[8..16], &2.0f64.to_le_bytes());
        assert_eq!(read_matrix(&p, 2, 3).unwrap(), m);
        assert!(matches!(read_matrix(&p, 3, 3), Err(IoError::Format { .. })));
    }
}
