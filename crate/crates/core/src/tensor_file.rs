//! `RRST` binary tensor format.
//!
//! Layout, all integers little-endian:
//!
//! | field        | type        |
//! |--------------|-------------|
//! | magic        | `b"RRST"`   |
//! | version      | `u32` (= 1) |
//! | element type | `u32` (0 = f32, 1 = f64) |
//! | rank         | `u32` (= 2) |
//! | dims         | `rank × u64` |
//! | payload      | row-major elements |

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::tensor::{Matrix, Role};

pub const MAGIC: [u8; 4] = *b"RRST";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    F32,
    F64,
}

impl ElementType {
    pub fn code(self) -> u32 {
        match self {
            ElementType::F32 => 0,
            ElementType::F64 => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(ElementType::F32),
            1 => Some(ElementType::F64),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            ElementType::F32 => 4,
            ElementType::F64 => 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("bad magic bytes {0:?}, expected \"RRST\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown element type code {0}")]
    UnknownElementType(u32),
    #[error("rank {0} is not supported, only rank 2")]
    BadRank(u32),
    #[error("truncated {section}: expected {expected} bytes, found {found}")]
    Truncated {
        section: &'static str,
        expected: u64,
        found: u64,
    },
    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(u64),
    #[error("dimensions {rows}x{cols} overflow addressable memory")]
    TooLarge { rows: u64, cols: u64 },
    #[error("element at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Writes `m` in `RRST` format. `F32` narrows every element.
pub fn write_tensor<W: Write>(
    m: &Matrix,
    element: ElementType,
    mut out: W,
) -> Result<(), TensorFileError> {
    let mut buf = Vec::with_capacity(28 + m.data().len() * element.width());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&element.code().to_le_bytes());
    buf.extend_from_slice(&2u32.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    match element {
        ElementType::F32 => {
            for &v in m.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        ElementType::F64 => {
            for &v in m.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

/// Reads an `RRST` stream to its end. The resulting matrix has `role`.
pub fn read_tensor<R: Read>(mut input: R, role: Role) -> Result<Matrix, TensorFileError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_tensor(&bytes, role)
}

/// Parses an in-memory `RRST` image.
pub fn parse_tensor(bytes: &[u8], role: Role) -> Result<Matrix, TensorFileError> {
    let mut cur = Cursor { bytes, pos: 0 };

    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(TensorFileError::BadMagic(magic));
    }
    let version = cur.u32("header")?;
    if version != VERSION {
        return Err(TensorFileError::UnsupportedVersion(version));
    }
    let code = cur.u32("header")?;
    let element =
        ElementType::from_code(code).ok_or(TensorFileError::UnknownElementType(code))?;
    let rank = cur.u32("header")?;
    if rank != 2 {
        return Err(TensorFileError::BadRank(rank));
    }
    let rows = cur.u64("dims")?;
    let cols = cur.u64("dims")?;

    let count = rows
        .checked_mul(cols)
        .filter(|&n| n <= usize::MAX as u64 / 8)
        .ok_or(TensorFileError::TooLarge { rows, cols })?;
    let expected = count * element.width() as u64;
    let remaining = (bytes.len() - cur.pos) as u64;
    if remaining < expected {
        return Err(TensorFileError::Truncated {
            section: "payload",
            expected,
            found: remaining,
        });
    }
    if remaining > expected {
        return Err(TensorFileError::TrailingBytes(remaining - expected));
    }

    let payload = &bytes[cur.pos..];
    let data: Vec<f64> = match element {
        ElementType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        ElementType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    let (rows, cols) = (rows as usize, cols as usize);
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(TensorFileError::NonFinite {
            row: pos / cols,
            col: pos % cols,
        });
    }
    Ok(Matrix::from_parts_unchecked(rows, cols, data, role))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], TensorFileError> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(TensorFileError::Truncated {
                section,
                expected: n as u64,
                found: left as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32, TensorFileError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64, TensorFileError> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
}
