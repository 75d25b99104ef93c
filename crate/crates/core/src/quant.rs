//! Symmetric round-to-nearest quantization.
//!
//! `α = max|X_g| / (2^(N-1) - 1)` per group and `q = round(x / α)` with ties to
//! even, clamped to `±(2^(N-1) - 1)`. An all-zero group gets `α = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Role};

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 8;

/// Largest representable magnitude, `2^(N-1) - 1`.
pub fn qmax(bits: u32) -> i32 {
    (1 << (bits - 1)) - 1
}

pub fn check_bits(bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "bit width {bits} outside {MIN_BITS}..={MAX_BITS}"
        )))
    }
}

/// Operand precision in a pipeline. `Bypass` skips quantization entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Int(u32),
    Bypass,
}

impl Precision {
    /// Widths of 16 bits and above mean bypass; 2..=8 are integer widths.
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits >= 16 {
            return Ok(Precision::Bypass);
        }
        check_bits(bits)?;
        Ok(Precision::Int(bits))
    }

    pub fn bits(self) -> u32 {
        match self {
            Precision::Int(b) => b,
            Precision::Bypass => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupScheme {
    PerTensor,
    /// One scale per row.
    PerChannel,
    /// Contiguous groups of `group_size` within each row; the last may be shorter.
    SubChannel { group_size: usize },
}

impl GroupScheme {
    pub fn validate(self) -> Result<()> {
        match self {
            GroupScheme::SubChannel { group_size: 0 } => {
                Err(Error::validation("sub-channel group size must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Scale groups per row, or `None` for per-tensor.
    fn groups_per_row(self, cols: usize) -> Option<usize> {
        match self {
            GroupScheme::PerTensor => None,
            GroupScheme::PerChannel => Some(1),
            GroupScheme::SubChannel { group_size } => Some(cols.div_ceil(group_size).max(1)),
        }
    }

    fn group_width(self, cols: usize) -> usize {
        match self {
            GroupScheme::SubChannel { group_size } => group_size,
            _ => cols.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    ints: Vec<i8>,
    bits: u32,
    scales: Vec<f64>,
    scheme: GroupScheme,
    role: Role,
}

impl QuantizedMatrix {
    /// Assembles a quantized matrix from raw parts, checking every invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        ints: Vec<i8>,
        bits: u32,
        scales: Vec<f64>,
        scheme: GroupScheme,
    ) -> Result<Self> {
        check_bits(bits)?;
        scheme.validate()?;
        if ints.len() != rows * cols {
            return Err(Error::shape(
                "QuantizedMatrix::from_parts",
                format!("{} ints for {rows}x{cols}", ints.len()),
            ));
        }
        let want = scheme.groups_per_row(cols).map_or(1, |g| g * rows);
        if scales.len() != want {
            return Err(Error::shape(
                "QuantizedMatrix::from_parts",
                format!("{} scales, scheme needs {want}", scales.len()),
            ));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::validation("scales must be finite and > 0"));
        }
        let q = qmax(bits);
        if ints.iter().any(|&v| (v as i32).abs() > q) {
            return Err(Error::validation(format!(
                "integer outside symmetric range ±{q}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            ints,
            bits,
            scales,
            scheme,
            role: Role::Activation,
        })
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn scheme(&self) -> GroupScheme {
        self.scheme
    }

    pub fn ints(&self) -> &[i8] {
        &self.ints
    }

    pub fn int_row(&self, row: usize) -> &[i8] {
        &self.ints[row * self.cols..(row + 1) * self.cols]
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Scale of the group holding `(row, col)`.
    pub fn scale_at(&self, row: usize, col: usize) -> f64 {
        match self.scheme.groups_per_row(self.cols) {
            None => self.scales[0],
            Some(g) => self.scales[row * g + col / self.scheme.group_width(self.cols)],
        }
    }

    /// One scale per row, available for per-channel matrices (and sub-channel
    /// ones whose single group spans the row).
    pub fn row_scales(&self) -> Option<&[f64]> {
        match self.scheme.groups_per_row(self.cols) {
            Some(1) => Some(&self.scales),
            _ => None,
        }
    }
}

/// Quantizes `m` to `bits`-bit symmetric integers under `scheme`.
pub fn quantize(m: &Matrix, bits: u32, scheme: GroupScheme) -> Result<QuantizedMatrix> {
    check_bits(bits)?;
    scheme.validate()?;
    let (rows, cols) = m.shape();
    let q = qmax(bits);

    let scales: Vec<f64> = match scheme.groups_per_row(cols) {
        None => vec![group_scale(m.data(), q)],
        Some(_) => {
            let width = scheme.group_width(cols);
            m.row_iter()
                .flat_map(|row| row.chunks(width).map(|g| group_scale(g, q)).collect::<Vec<_>>())
                .collect()
        }
    };

    let mut ints = vec![0i8; rows * cols];
    if cols > 0 {
        let per_row = scheme.groups_per_row(cols);
        let width = scheme.group_width(cols);
        ints.par_chunks_mut(cols)
            .zip(m.data().par_chunks(cols))
            .enumerate()
            .for_each(|(r, (out, row))| {
                for (c, (o, &x)) in out.iter_mut().zip(row).enumerate() {
                    let alpha = match per_row {
                        None => scales[0],
                        Some(g) => scales[r * g + c / width],
                    };
                    *o = quantize_value(x, alpha, q);
                }
            });
    }

    Ok(QuantizedMatrix {
        rows,
        cols,
        ints,
        bits,
        scales,
        scheme,
        role: m.role(),
    })
}

fn group_scale(group: &[f64], q: i32) -> f64 {
    let amax = group.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if amax == 0.0 {
        1.0
    } else {
        amax / q as f64
    }
}

fn quantize_value(x: f64, alpha: f64, q: i32) -> i8 {
    let qf = q as f64;
    (x / alpha).round_ties_even().clamp(-qf, qf) as i8
}

/// Multiplies every integer by its group's scale.
pub fn dequantize(q: &QuantizedMatrix) -> Matrix {
    let mut data = Vec::with_capacity(q.ints.len());
    for r in 0..q.rows {
        for (c, &v) in q.int_row(r).iter().enumerate() {
            data.push(v as f64 * q.scale_at(r, c));
        }
    }
    Matrix::from_parts_unchecked(q.rows, q.cols, data, q.role)
}
