//! Sylvester Hadamard rotations.
//!
//! `R[i][j] = (-1)^popcount(i & j) / √K` for `K` a power of two. `R` is
//! symmetric and orthogonal, so rotating the weight by `R` as well leaves
//! `X·Wᵀ` unchanged: `(XR)(WR)ᵀ = X R Rᵀ Wᵀ = XWᵀ`.
//!
//! Rotations are applied row by row with a fast Walsh–Hadamard transform;
//! [`HadamardRotation::to_matrix`] gives the dense matrix for reference checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{mu, MuKind};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HadamardRotation {
    dim: usize,
}

/// Scaled Sylvester Hadamard rotation of size `k`.
pub fn hadamard(k: usize) -> Result<HadamardRotation> {
    HadamardRotation::new(k)
}

impl HadamardRotation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::UnsupportedDimension { dim });
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn norm(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let sign = if (i & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / self.norm()
    }

    /// Dense `K×K` matrix.
    pub fn to_matrix(&self) -> Matrix {
        let k = self.dim;
        let mut data = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                data.push(self.entry(i, j));
            }
        }
        Matrix::from_parts_unchecked(k, k, data, Role::Weight)
    }

    /// Replaces `t` with `t·R`.
    pub fn rotate_in_place(&self, t: &mut [f64]) -> Result<()> {
        if t.len() != self.dim {
            return Err(Error::shape(
                "rotate",
                format!("token length {} vs rotation dim {}", t.len(), self.dim),
            ));
        }
        fwht(t);
        let n = self.norm();
        for v in t.iter_mut() {
            *v /= n;
        }
        Ok(())
    }

    pub fn rotate_vector(&self, t: &[f64]) -> Result<Vec<f64>> {
        let mut out = t.to_vec();
        self.rotate_in_place(&mut out)?;
        Ok(out)
    }

    /// `M·R`, row by row.
    pub fn rotate_rows(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.dim {
            return Err(Error::shape(
                "rotate",
                format!("{} columns vs rotation dim {}", m.cols(), self.dim),
            ));
        }
        let mut data = m.data().to_vec();
        let n = self.norm();
        data.par_chunks_mut(self.dim).for_each(|row| {
            fwht(row);
            for v in row.iter_mut() {
                *v /= n;
            }
        });
        Ok(Matrix::from_parts_unchecked(m.rows(), m.cols(), data, m.role()))
    }
}

/// Unnormalized in-place Walsh–Hadamard transform. `a.len()` must be a power of two.
fn fwht(a: &mut [f64]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        for block in a.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// `X·R`.
pub fn rotate_activation(x: &Matrix, r: &HadamardRotation) -> Result<Matrix> {
    r.rotate_rows(x)
}

/// `W·R`, the row form of `R⁻¹Wᵀ = RᵀWᵀ`.
pub fn rotate_weight(w: &Matrix, r: &HadamardRotation) -> Result<Matrix> {
    r.rotate_rows(w)
}

/// `M·R` through the dense matrix with ascending-index summation.
pub fn rotate_dense(m: &Matrix, r: &HadamardRotation) -> Result<Matrix> {
    if m.cols() != r.dim() {
        return Err(Error::shape(
            "rotate_dense",
            format!("{} columns vs rotation dim {}", m.cols(), r.dim()),
        ));
    }
    let dense = r.to_matrix();
    let k = r.dim();
    let mut data = Vec::with_capacity(m.rows() * k);
    for row in m.row_iter() {
        for j in 0..k {
            let mut acc = 0.0;
            for (i, &v) in row.iter().enumerate() {
                acc += v * dense.get(i, j);
            }
            data.push(acc);
        }
    }
    Ok(Matrix::from_parts_unchecked(m.rows(), k, data, m.role()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LessSmoothReport {
    /// Fraction of nonzero tokens whose μ strictly increased under rotation.
    pub probability: f64,
    /// Nonzero tokens considered.
    pub counted: usize,
    /// All-zero tokens, excluded from the fraction.
    pub zero_tokens: usize,
}

/// Fraction of tokens `t` (rows of `x`) with `μ(t·R) > μ(t)`.
pub fn less_smooth_probability(
    x: &Matrix,
    r: &HadamardRotation,
    kind: MuKind,
) -> Result<LessSmoothReport> {
    let rotated = r.rotate_rows(x)?;
    let mut worse = 0usize;
    let mut counted = 0usize;
    let mut zero_tokens = 0usize;
    for (t, tr) in x.row_iter().zip(rotated.row_iter()) {
        if t.iter().all(|&v| v == 0.0) {
            zero_tokens += 1;
            continue;
        }
        counted += 1;
        if mu(tr, kind)? > mu(t, kind)? {
            worse += 1;
        }
    }
    let probability = if counted == 0 {
        0.0
    } else {
        worse as f64 / counted as f64
    };
    Ok(LessSmoothReport {
        probability,
        counted,
        zero_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_orders() {
        assert_eq!(hadamard(1).unwrap().to_matrix().data(), &[1.0]);
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(hadamard(2).unwrap().to_matrix().data(), &[h, h, h, -h]);
    }

    #[test]
    fn k4_is_kronecker_square_and_orthogonal() {
        let h2 = hadamard(2).unwrap().to_matrix();
        let h4 = hadamard(4).unwrap().to_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let kron = h2.get(i / 2, j / 2) * h2.get(i % 2, j % 2);
                assert_abs_diff_eq!(h4.get(i, j), kron, epsilon = 1e-15);
                let dot: f64 = (0..4).map(|c| h4.get(i, c) * h4.get(j, c)).sum();
                assert_abs_diff_eq!(dot, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        for k in [0, 3, 6, 11008] {
            assert!(matches!(
                hadamard(k),
                Err(Error::UnsupportedDimension { dim }) if dim == k
            ));
        }
    }

    #[test]
    fn one_hot_selects_a_row() {
        let r = hadamard(4).unwrap();
        let t = r.rotate_vector(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        let dense = r.to_matrix();
        for (j, v) in t.iter().enumerate() {
            assert_abs_diff_eq!(v.abs(), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(*v, dense.get(2, j), epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_token_concentrates() {
        let eps = 0.3;
        let t = hadamard(4).unwrap().rotate_vector(&[eps; 4]).unwrap();
        assert_abs_diff_eq!(t[0], eps * 2.0, epsilon = 1e-15);
        assert!(t[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn fwht_matches_dense() {
        let r = hadamard(16).unwrap();
        let m = Matrix::from_fn(3, 16, Role::Activation, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0).unwrap();
        let fast = rotate_activation(&m, &r).unwrap();
        let dense = rotate_dense(&m, &r).unwrap();
        assert!(fast.max_abs_diff(&dense).unwrap() <= 1e-12);
    }

    #[test]
    fn less_smooth_extremes() {
        let r = hadamard(8).unwrap();
        let one_hot = Matrix::from_fn(8, 8, Role::Activation, |i, j| (i == j) as u8 as f64).unwrap();
        let rep = less_smooth_probability(&one_hot, &r, MuKind::Rms).unwrap();
        assert_eq!(rep.probability, 0.0);
        assert_eq!(rep.counted, 8);
        let flat = Matrix::from_fn(5, 8, Role::Activation, |i, _| i as f64).unwrap();
        let rep = less_smooth_probability(&flat, &r, MuKind::Rms).unwrap();
        assert_eq!(rep.probability, 1.0);
        assert_eq!(rep.zero_tokens, 1);
        assert_eq!(rep.counted, 4);
    }

    #[test]
    fn shape_mismatch() {
        let r = hadamard(4).unwrap();
        assert!(matches!(
            r.rotate_rows(&Matrix::zeros(2, 8, Role::Activation)),
            Err(Error::Shape { .. })
        ));
    }
}
