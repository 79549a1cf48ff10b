//! Little-endian binary matrix container.
//!
//! One file holds one or more named f32 matrices. The same encoding backs
//! model checkpoints and persisted posteriorgrams / spectrograms:
//!
//! ```text
//! magic   8 bytes  "RFVCMATS"
//! version u32
//! count   u32
//! entry:  name_len u32, name utf-8,
//!         rows u32, cols u32,
//!         rows*cols f32 (little-endian, row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"RFVCMATS";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a matrix container (bad magic)")]
    BadMagic { path: String },
    #[error("{path}: unsupported container version {0}", .version)]
    BadVersion { path: String, version: u32 },
    #[error("{path}: corrupt container: {detail}")]
    Corrupt { path: String, detail: String },
}

fn io_err(path: &Path, source: std::io::Error) -> MatrixIoError {
    MatrixIoError::Io { path: path.display().to_string(), source }
}

/// Writes the matrix block into any writer; f64 values are truncated to
/// f32 on the way out.
pub fn write_matrices_to<W: Write>(
    w: &mut W,
    entries: &[(String, Array2<f64>)],
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, m) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.nrows() as u32).to_le_bytes())?;
        w.write_all(&(m.ncols() as u32).to_le_bytes())?;
        for &v in m.iter() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes named matrices to a file.
pub fn write_matrices(path: &Path, entries: &[(String, Array2<f64>)]) -> Result<(), MatrixIoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrices_to(&mut w, entries).map_err(|e| io_err(path, e))?;
    w.into_inner()
        .map_err(|e| io_err(path, e.into_error()))?
        .sync_all()
        .map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads the matrix block from any reader, widening f32 payloads to f64
/// exactly. `path` labels errors only.
pub fn read_matrices_from<R: Read>(
    r: &mut R,
    path: &Path,
) -> Result<Vec<(String, Array2<f64>)>, MatrixIoError> {
    let corrupt = |detail: &str| MatrixIoError::Corrupt {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(MatrixIoError::BadMagic { path: path.display().to_string() });
    }
    let version = read_u32(r, path)?;
    if version != VERSION {
        return Err(MatrixIoError::BadVersion { path: path.display().to_string(), version });
    }
    let count = read_u32(r, path)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(r, path)? as usize;
        if name_len > 4096 {
            return Err(corrupt("entry name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|e| io_err(path, e))?;
        let name = String::from_utf8(name).map_err(|_| corrupt("entry name not utf-8"))?;
        let rows = read_u32(r, path)? as usize;
        let cols = read_u32(r, path)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 4];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
            data.push(f64::from(f32::from_le_bytes(buf)));
        }
        let m = Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| corrupt("shape/data length mismatch"))?;
        out.push((name, m));
    }
    Ok(out)
}

/// Reads all named matrices from a file.
pub fn read_matrices(path: &Path) -> Result<Vec<(String, Array2<f64>)>, MatrixIoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    read_matrices_from(&mut r, path)
}

/// Convenience for single-matrix files (persisted posteriorgrams etc.).
pub fn write_matrix(path: &Path, name: &str, m: &Array2<f64>) -> Result<(), MatrixIoError> {
    write_matrices(path, &[(name.to_string(), m.clone())])
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>, MatrixIoError> {
    let mut all = read_matrices(path)?;
    if all.len() != 1 {
        return Err(MatrixIoError::Corrupt {
            path: path.display().to_string(),
            detail: format!("expected one matrix, found {}", all.len()),
        });
    }
    Ok(all.remove(0).1)
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32, MatrixIoError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_for_f32_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        // Values already representable in f32 survive bit-exactly.
        let a = Array2::from_shape_fn((3, 4), |(i, j)| f64::from((i * 4 + j) as f32) * 0.25);
        let b = Array2::from_shape_fn((2, 2), |(i, j)| f64::from(i as f32) - f64::from(j as f32));
        write_matrices(&path, &[("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
        let got = read_matrices(&path).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0, "a");
        assert_eq!(got[0].1, a);
        assert_eq!(got[1].1, b);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTAMAGICFILE").unwrap();
        assert!(matches!(read_matrices(&path), Err(MatrixIoError::BadMagic { .. })));
    }
}
