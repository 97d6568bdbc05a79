//! Readers and writers for the community vector formats.
//!
//! * fvecs: per record, little-endian `i32` dim followed by `dim` `f32`.
//! * bvecs: per record, `i32` dim followed by `dim` bytes (widened to `f32`).
//! * ivecs: per record, `i32` dim followed by `dim` `i32` (ground-truth IDs).
//! * raw-f32: headerless little-endian `f32`, dimension supplied by caller.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::store::VectorStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFormat {
    Fvecs,
    Bvecs,
    /// Headerless floats with the given dimension.
    RawF32 { dim: usize },
}

impl VectorFormat {
    /// Guesses the format from the file extension; raw files need `dim`.
    pub fn from_path(path: &Path, raw_dim: Option<usize>) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fvecs") => Ok(VectorFormat::Fvecs),
            Some("bvecs") => Ok(VectorFormat::Bvecs),
            _ => match raw_dim {
                Some(dim) => Ok(VectorFormat::RawF32 { dim }),
                None => Err(Error::usage(format!(
                    "{}: cannot infer vector format; use .fvecs/.bvecs or give a raw dimension",
                    path.display()
                ))),
            },
        }
    }
}

fn load_err(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn read_i32(bytes: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Splits a `dim`-prefixed file into records, checking every prefix.
/// Returns (dim, payload byte ranges).
fn records(path: &Path, bytes: &[u8], elem: usize) -> Result<(usize, Vec<usize>)> {
    if bytes.is_empty() {
        return Err(load_err(path, 0, "empty file"));
    }
    let mut offset = 0usize;
    let mut starts = Vec::new();
    let mut dim = None;
    while offset < bytes.len() {
        let record = starts.len();
        if offset + 4 > bytes.len() {
            return Err(load_err(path, offset, format!("record {record}: truncated dimension header")));
        }
        let d = read_i32(bytes, offset);
        if d <= 0 {
            return Err(load_err(path, offset, format!("record {record}: invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(load_err(
                    path,
                    offset,
                    format!("record {record}: dimension {d} differs from {expected}"),
                ))
            }
            _ => {}
        }
        let end = offset + 4 + d * elem;
        if end > bytes.len() {
            return Err(load_err(path, offset, format!("record {record}: truncated payload")));
        }
        starts.push(offset + 4);
        offset = end;
    }
    Ok((dim.unwrap(), starts))
}

fn check_finite(path: &Path, data: &[f32], dim: usize, byte_of: impl Fn(usize) -> usize) -> Result<()> {
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(load_err(
            path,
            byte_of(pos),
            format!("record {}: non-finite component {}", pos / dim, pos % dim),
        ));
    }
    Ok(())
}

/// Decodes vectors from an in-memory buffer. `path` is only used in errors.
pub fn decode_vectors(path: &Path, bytes: &[u8], format: VectorFormat, metric: Metric) -> Result<VectorStore> {
    let (dim, data) = match format {
        VectorFormat::Fvecs => {
            let (dim, starts) = records(path, bytes, 4)?;
            let mut data = Vec::with_capacity(starts.len() * dim);
            for &s in &starts {
                data.extend(
                    bytes[s..s + dim * 4]
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
                );
            }
            let record_len = 4 + dim * 4;
            check_finite(path, &data, dim, |pos| {
                (pos / dim) * record_len + 4 + (pos % dim) * 4
            })?;
            (dim, data)
        }
        VectorFormat::Bvecs => {
            let (dim, starts) = records(path, bytes, 1)?;
            let mut data = Vec::with_capacity(starts.len() * dim);
            for &s in &starts {
                data.extend(bytes[s..s + dim].iter().map(|&b| b as f32));
            }
            (dim, data)
        }
        VectorFormat::RawF32 { dim } => {
            if dim == 0 {
                return Err(Error::usage("raw-f32 dimension must be >= 1"));
            }
            let row = dim * 4;
            if bytes.is_empty() || bytes.len() % row != 0 {
                return Err(load_err(
                    path,
                    bytes.len() - bytes.len() % row.max(1),
                    format!("size {} is not a non-empty multiple of {row} bytes", bytes.len()),
                ));
            }
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            check_finite(path, &data, dim, |pos| pos * 4)?;
            (dim, data)
        }
    };
    VectorStore::new(data, dim, metric)
}

pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat, metric: Metric) -> Result<VectorStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_vectors(path, &bytes, format, metric)
}

pub fn write_fvecs(path: impl AsRef<Path>, store: &VectorStore) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let dim = store.dim() as i32;
    let res: std::io::Result<()> = (|| {
        for row in store.rows() {
            w.write_all(&dim.to_le_bytes())?;
            for x in row {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Writes one ivecs record per list.
pub fn write_ivecs(path: impl AsRef<Path>, lists: &[Vec<u32>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        for list in lists {
            w.write_all(&(list.len() as i32).to_le_bytes())?;
            for &id in list {
                w.write_all(&(id as i32).to_le_bytes())?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dim, starts) = records(path, &bytes, 4)?;
    starts
        .iter()
        .map(|&s| {
            (0..dim)
                .map(|i| {
                    let v = read_i32(&bytes, s + i * 4);
                    u32::try_from(v).map_err(|_| load_err(path, s + i * 4, format!("negative id {v}")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fvecs_bytes(rows: &[&[f32]]) -> Vec<u8> {
        let mut out = Vec::new();
        for r in rows {
            out.extend((r.len() as i32).to_le_bytes());
            for x in *r {
                out.extend(x.to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn fvecs_two_vectors() {
        let bytes = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(bytes.len(), 24);
        let s = decode_vectors(Path::new("t.fvecs"), &bytes, VectorFormat::Fvecs, Metric::L2Squared).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        assert_eq!(s.vector(1), &[3.0, 4.0]);
    }

    #[test]
    fn fvecs_mismatched_dim_names_record() {
        let bytes = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0]]);
        let err = decode_vectors(Path::new("t.fvecs"), &bytes, VectorFormat::Fvecs, Metric::L2Squared).unwrap_err();
        match err {
            Error::Load { offset, reason, .. } => {
                assert_eq!(offset, 24);
                assert!(reason.contains("record 2"), "{reason}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn fvecs_truncated() {
        let mut bytes = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0]]);
        bytes.truncate(21);
        let err = decode_vectors(Path::new("t"), &bytes, VectorFormat::Fvecs, Metric::L2Squared).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn fvecs_non_finite_offset() {
        let bytes = fvecs_bytes(&[&[1.0, 2.0], &[3.0, f32::NAN]]);
        match decode_vectors(Path::new("t"), &bytes, VectorFormat::Fvecs, Metric::L2Squared).unwrap_err() {
            Error::Load { offset, .. } => assert_eq!(offset, 12 + 4 + 4),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn raw_f32_size_arithmetic() {
        let bytes = vec![0u8; 512];
        let s = decode_vectors(Path::new("t.bin"), &bytes, VectorFormat::RawF32 { dim: 128 }, Metric::L2Squared)
            .unwrap();
        assert_eq!((s.len(), s.dim()), (1, 128));
        assert!(decode_vectors(Path::new("t"), &bytes[..500], VectorFormat::RawF32 { dim: 128 }, Metric::L2Squared).is_err());
    }

    #[test]
    fn bvecs_widened() {
        let mut bytes = 3i32.to_le_bytes().to_vec();
        bytes.extend([0u8, 128, 255]);
        let s = decode_vectors(Path::new("t"), &bytes, VectorFormat::Bvecs, Metric::L2Squared).unwrap();
        assert_eq!(s.vector(0), &[0.0, 128.0, 255.0]);
    }

    #[test]
    fn ivecs_and_fvecs_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ids = vec![vec![3u32, 1, 4], vec![1, 5, 9]];
        let p = dir.path().join("gt.ivecs");
        write_ivecs(&p, &ids).unwrap();
        assert_eq!(read_ivecs(&p).unwrap(), ids);

        let store = VectorStore::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]], Metric::L2Squared).unwrap();
        let p = dir.path().join("v.fvecs");
        write_fvecs(&p, &store).unwrap();
        let back = load_vectors(&p, VectorFormat::from_path(&p, None).unwrap(), Metric::L2Squared).unwrap();
        assert_eq!(back.as_slice(), store.as_slice());
    }
}
