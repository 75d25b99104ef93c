//! Runtime smoothing plans and the SmoothQuant baseline.
//!
//! Runtime smoothing (RS) divides activation channels by their live abs-maxima. For
//! group-wise execution the channels are first reordered by decreasing
//! maximum, then every contiguous run of `L` reordered channels shares the
//! run's maximum as its divisor. The weight is reordered with the same
//! permutation but never rescaled.
//!
//! SmoothQuant instead migrates part of the activation range into the weight
//! using offline calibration maxima.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Column abs-maxima of `x`; all-zero columns map to 1.
pub fn channel_max_scales(x: &Matrix) -> Vec<f64> {
    x.column_abs_max()
        .into_iter()
        .map(|s| if s == 0.0 { 1.0 } else { s })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingPlan {
    /// `permutation[j]` is the original channel placed at position `j`.
    permutation: Vec<usize>,
    group_size: usize,
    /// One divisor per group of `group_size` permuted channels.
    group_scales: Vec<f64>,
    /// Raw per-channel scales in original channel order.
    raw_scales: Vec<f64>,
}

/// Sorts channels by `s` descending (ties by ascending index) and groups them.
pub fn build_plan(s: &[f64], group_size: usize) -> Result<SmoothingPlan> {
    if group_size == 0 {
        return Err(Error::validation("smoothing group size must be >= 1"));
    }
    if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::validation(format!(
            "smoothing scales must be finite and > 0, got {v}"
        )));
    }
    let mut permutation: Vec<usize> = (0..s.len()).collect();
    // stable sort keeps ascending index order among equal scales
    permutation.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let group_scales = permutation
        .chunks(group_size)
        .map(|g| g.iter().map(|&c| s[c]).fold(0.0_f64, f64::max))
        .collect();
    Ok(SmoothingPlan {
        permutation,
        group_size,
        group_scales,
        raw_scales: s.to_vec(),
    })
}

impl SmoothingPlan {
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn group_scales(&self) -> &[f64] {
        &self.group_scales
    }

    pub fn raw_scales(&self) -> &[f64] {
        &self.raw_scales
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    /// Divisor of each permuted channel.
    pub fn effective_scales(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.group_scales[j / self.group_size])
            .collect()
    }

    /// Raw scales in permuted order (non-increasing).
    pub fn permuted_raw_scales(&self) -> Vec<f64> {
        self.permutation.iter().map(|&c| self.raw_scales[c]).collect()
    }

    /// `inverse[c]` is the permuted position of original channel `c`.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.dim()];
        for (pos, &c) in self.permutation.iter().enumerate() {
            inv[c] = pos;
        }
        inv
    }

    fn check_cols(&self, m: &Matrix, op: &'static str) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::shape(
                op,
                format!("{} columns vs plan over {} channels", m.cols(), self.dim()),
            ));
        }
        Ok(())
    }
}

/// Permutes the columns of `x` and divides each by its group scale.
pub fn apply_smooth(x: &Matrix, plan: &SmoothingPlan) -> Result<Matrix> {
    plan.check_cols(x, "apply_smooth")?;
    let eff = plan.effective_scales();
    let mut data = Vec::with_capacity(x.data().len());
    for row in x.row_iter() {
        data.extend(
            plan.permutation
                .iter()
                .zip(&eff)
                .map(|(&c, &s)| row[c] / s),
        );
    }
    Matrix::new(x.rows(), x.cols(), data, x.role())
}

/// Permutes the columns of `w`; values are left unscaled.
pub fn apply_perm_to_weight(w: &Matrix, plan: &SmoothingPlan) -> Result<Matrix> {
    plan.check_cols(w, "apply_perm_to_weight")?;
    w.select_columns(&plan.permutation)
}

/// Undoes the plan's column permutation.
pub fn unpermute_columns(m: &Matrix, plan: &SmoothingPlan) -> Result<Matrix> {
    plan.check_cols(m, "unpermute_columns")?;
    m.select_columns(&plan.inverse_permutation())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothQuantConfig {
    /// Migration strength in `[0, 1]`.
    pub alpha: f64,
    pub act_max: Vec<f64>,
    pub weight_max: Vec<f64>,
}

impl SmoothQuantConfig {
    /// Calibration maxima taken from a calibration activation and the weight.
    pub fn calibrate(alpha: f64, calib_x: &Matrix, w: &Matrix) -> Self {
        Self {
            alpha,
            act_max: calib_x.column_abs_max(),
            weight_max: w.column_abs_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::validation(format!(
                "SmoothQuant alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.act_max.len() != self.weight_max.len() {
            return Err(Error::shape(
                "SmoothQuantConfig",
                format!(
                    "{} activation maxima vs {} weight maxima",
                    self.act_max.len(),
                    self.weight_max.len()
                ),
            ));
        }
        if self
            .act_max
            .iter()
            .chain(&self.weight_max)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::validation("calibration maxima must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `s_j = max|X_j|^α / max|W_j|^(1-α)`; channels with a zero maximum get 1.
pub fn smoothquant_scales(cfg: &SmoothQuantConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(cfg
        .act_max
        .iter()
        .zip(&cfg.weight_max)
        .map(|(&ax, &aw)| {
            if ax == 0.0 || aw == 0.0 {
                1.0
            } else {
                ax.powf(cfg.alpha) / aw.powf(1.0 - cfg.alpha)
            }
        })
        .collect())
}

/// Returns `(X·diag(s)⁻¹, W·diag(s))`.
pub fn smoothquant_apply(x: &Matrix, w: &Matrix, s: &[f64]) -> Result<(Matrix, Matrix)> {
    if x.cols() != s.len() || w.cols() != s.len() {
        return Err(Error::shape(
            "smoothquant_apply",
            format!(
                "X has {} columns, W has {}, {} scales",
                x.cols(),
                w.cols(),
                s.len()
            ),
        ));
    }
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::validation("SmoothQuant scales must be finite and > 0"));
    }
    let xs = Matrix::from_fn(x.rows(), x.cols(), x.role(), |r, c| x.get(r, c) / s[c])?;
    let ws = Matrix::from_fn(w.rows(), w.cols(), w.role(), |r, c| w.get(r, c) * s[c])?;
    Ok((xs, ws))
}
