//! Embedding files.
//!
//! `EMB1` layout, all little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `b"EMB1"`            |
//! | 4      | 4    | format version (`u32`, 1)  |
//! | 8      | 4    | vector count (`u32`, >= 1) |
//! | 12     | 4    | dimension (`u32`, >= 1)    |
//! | 16     | 4·count·dim | `f32` values, row-major |
//!
//! A CSV fallback (one vector per line, comma-separated decimals) is
//! accepted on read.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embedding::{ConceptSet, Role};
use crate::error::StatsError;

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum EmbeddingFileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: byte {offset}: {reason}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Invalid { path: PathBuf, source: StatsError },

    #[error("{count} vectors of dimension {dim} exceed the 32-bit element count")]
    TooLarge { count: usize, dim: usize },
}

/// A decoding failure before a path is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub offset: u64,
    pub reason: String,
}

impl DecodeError {
    fn new(offset: usize, reason: impl Into<String>) -> Self {
        DecodeError {
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    fn at(self, path: &Path) -> EmbeddingFileError {
        EmbeddingFileError::Format {
            path: path.to_path_buf(),
            offset: self.offset,
            reason: self.reason,
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Checks that `count × dim` fits the header's 32-bit fields.
pub fn check_shape(count: usize, dim: usize) -> Result<(), EmbeddingFileError> {
    let fits = u32::try_from(count).is_ok()
        && u32::try_from(dim).is_ok()
        && (count as u64)
            .checked_mul(dim as u64)
            .is_some_and(|n| n <= u32::MAX as u64);
    if fits {
        Ok(())
    } else {
        Err(EmbeddingFileError::TooLarge { count, dim })
    }
}

/// Decodes an `EMB1` buffer into rows.
pub fn decode_emb1(bytes: &[u8]) -> Result<Vec<Vec<f32>>, DecodeError> {
    if bytes.is_empty() {
        return Err(DecodeError::new(0, "empty file"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::new(
            bytes.len(),
            format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        ));
    }
    if bytes[..4] != MAGIC {
        return Err(DecodeError::new(0, "bad magic, expected EMB1"));
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(DecodeError::new(
            4,
            format!("unsupported format version {version}"),
        ));
    }
    let count = read_u32(bytes, 8) as usize;
    if count == 0 {
        return Err(DecodeError::new(8, "vector count is zero"));
    }
    let dim = read_u32(bytes, 12) as usize;
    if dim == 0 {
        return Err(DecodeError::new(12, "dimension is zero"));
    }
    let values = (count as u64) * (dim as u64);
    if values > u32::MAX as u64 {
        return Err(DecodeError::new(8, "count x dim overflows 32 bits"));
    }
    let expected = HEADER_LEN as u64 + 4 * values;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(DecodeError::new(
            bytes.len(),
            format!("truncated payload, expected {expected} bytes"),
        ));
    }
    if actual > expected {
        return Err(DecodeError::new(
            expected as usize,
            format!("{} trailing bytes", actual - expected),
        ));
    }
    let payload = &bytes[HEADER_LEN..];
    let mut rows = Vec::with_capacity(count);
    for (r, row_bytes) in payload.chunks_exact(4 * dim).enumerate() {
        let mut row = Vec::with_capacity(dim);
        for (c, b) in row_bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if !v.is_finite() {
                let offset = HEADER_LEN + 4 * (r * dim + c);
                return Err(DecodeError::new(offset, format!("non-finite value {v}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Encodes rows of equal width as an `EMB1` buffer.
pub fn encode_emb1<'a>(
    rows: impl ExactSizeIterator<Item = &'a [f32]>,
    dim: usize,
) -> Result<Vec<u8>, EmbeddingFileError> {
    let count = rows.len();
    check_shape(count, dim)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * count * dim);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for row in rows {
        assert_eq!(row.len(), dim, "ragged rows");
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses CSV embeddings: one vector per line, comma-separated decimals.
pub fn decode_csv(bytes: &[u8]) -> Result<Vec<Vec<f32>>, DecodeError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte());
            DecodeError::new(offset as usize, e.to_string())
        })?;
        let offset = record.position().map_or(0, |p| p.byte()) as usize;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                let v: f32 = field
                    .parse()
                    .map_err(|_| DecodeError::new(offset, format!("not a number: `{field}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DecodeError::new(
                        offset,
                        format!("non-finite value `{field}`"),
                    ))
                }
            })
            .collect::<Result<Vec<f32>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(DecodeError::new(
                    offset,
                    format!("row has {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DecodeError::new(0, "empty file"));
    }
    Ok(rows)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads the raw rows of an `EMB1` or CSV file.
///
/// Files starting with the `EMB1` magic are binary; otherwise a `.csv`
/// extension selects the CSV reader.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f32>>, EmbeddingFileError> {
    let bytes = fs::read(path).map_err(|source| EmbeddingFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = if bytes.starts_with(&MAGIC) || !is_csv(path) {
        decode_emb1(&bytes)
    } else {
        decode_csv(&bytes)
    };
    decoded.map_err(|e| e.at(path))
}

/// Reads a concept set from an `EMB1` or CSV file.
pub fn read_embeddings(
    path: &Path,
    name: &str,
    role: Role,
) -> Result<ConceptSet, EmbeddingFileError> {
    let rows = read_rows(path)?;
    ConceptSet::from_rows(name, role, rows).map_err(|source| EmbeddingFileError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a concept set as an `EMB1` file.
pub fn write_embeddings(set: &ConceptSet, path: &Path) -> Result<(), EmbeddingFileError> {
    let bytes = encode_emb1(set.iter().map(|e| e.as_slice()), set.dim())?;
    fs::write(path, bytes).map_err(|source| EmbeddingFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}
