//! Embedding file formats.
//!
//! Binary layout (`.uaeb`): a 16-byte header — magic `UAEB`, version `u16`,
//! modality count `u16`, batch size `u32`, dimension `u32`, all
//! little-endian — followed by M contiguous row-major B x d blocks of
//! little-endian `f64`. Exact round trip by construction.
//!
//! Text layout: whitespace-separated values, one row per line, one file per
//! modality; `#` starts a comment. Values are written in the shortest
//! representation that parses back to the identical `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::CliError;
use unialign_core::geometry::ModalityBatch;
use unialign_core::linalg::Mat;

pub const MAGIC: &[u8; 4] = b"UAEB";
pub const VERSION: u16 = 1;

pub fn write_embeddings(path: &Path, batches: &[ModalityBatch]) -> Result<(), CliError> {
    if batches.is_empty() {
        return Err(CliError::Shape("nothing to write: no modalities".into()));
    }
    let b = batches[0].len();
    let d = batches[0].dim();
    for batch in batches {
        if batch.len() != b || batch.dim() != d {
            return Err(CliError::Shape(format!(
                "modalities disagree on shape: {}x{} vs {}x{}",
                b,
                d,
                batch.len(),
                batch.dim()
            )));
        }
    }
    if batches.len() > u16::MAX as usize || b > u32::MAX as usize || d > u32::MAX as usize {
        return Err(CliError::Shape("embedding block too large for the header".into()));
    }

    let io_err = |e: std::io::Error| CliError::Parse(format!("cannot write {}: {e}", path.display()));
    let mut out = Vec::with_capacity(16 + batches.len() * b * d * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(batches.len() as u16).to_le_bytes());
    out.extend_from_slice(&(b as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for batch in batches {
        for v in batch.mat().data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(&out).map_err(io_err)?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Vec<ModalityBatch>, CliError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: &str| CliError::Parse(format!("{}: {msg}", path.display()));

    if bytes.len() < 16 {
        return Err(bad("file shorter than the 16-byte header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic, expected UAEB"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let m = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let b = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let d = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
    if m == 0 || b == 0 || d == 0 {
        return Err(bad("empty embedding block"));
    }
    let expected = 16 + m * b * d * 8;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "payload size mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }

    let mut batches = Vec::with_capacity(m);
    let mut offset = 16;
    for modality in 0..m {
        let mut data = Vec::with_capacity(b * d);
        for _ in 0..b * d {
            let chunk: [u8; 8] = bytes[offset..offset + 8].try_into().unwrap();
            data.push(f64::from_le_bytes(chunk));
            offset += 8;
        }
        let mat = Mat::from_vec(b, d, data);
        batches.push(ModalityBatch::from_raw(mat, modality as u32)?);
    }
    Ok(batches)
}

pub fn write_text_matrix(path: &Path, mat: &Mat) -> Result<(), CliError> {
    let mut out = String::new();
    for i in 0..mat.rows() {
        let row: Vec<String> = mat.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))
}

pub fn read_text_matrix(path: &Path) -> Result<Mat, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!(
                    "{}: line {}: cannot parse {field:?} as a number",
                    path.display(),
                    idx + 1
                ))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Parse(format!(
                    "{}: line {}: row has {} values, expected {}",
                    path.display(),
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(Mat::from_rows(&rows))
}

/// Loads one modality per file: `.uaeb` files must contain exactly one
/// block, anything else is read as a text matrix.
pub fn read_modalities(paths: &[std::path::PathBuf]) -> Result<Vec<ModalityBatch>, CliError> {
    let mut batches = Vec::with_capacity(paths.len());
    for (id, path) in paths.iter().enumerate() {
        if path.extension().and_then(|e| e.to_str()) == Some("uaeb") {
            let mut blocks = read_embeddings(path)?;
            if blocks.len() != 1 {
                return Err(CliError::Shape(format!(
                    "{}: expected a single-modality file, found {} blocks",
                    path.display(),
                    blocks.len()
                )));
            }
            batches.push(blocks.remove(0));
        } else {
            let mat = read_text_matrix(path)?;
            batches.push(ModalityBatch::from_raw(mat, id as u32)?);
        }
    }
    Ok(batches)
}
