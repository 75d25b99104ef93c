//! Seeded generators for outlier-bearing activations.
//!
//! Every generator is a pure function of its spec. Values come from ChaCha8
//! stream 0 of the seed; random coordinate layouts come from stream 1, so the
//! layout helpers never shift the value stream.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Role};

const VALUE_STREAM: u64 = 0;
const LAYOUT_STREAM: u64 = 1;

/// Seeded ChaCha8 generator on a fixed stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDistribution {
    /// `sigma · (g + offset · sign_j)` with `g ~ N(0, 1)` and one random sign per column.
    /// `offset = 0` is the plain scaled standard normal.
    Gaussian { sigma: f64, channel_offset: f64 },
    /// Every entry equals `value`.
    Constant { value: f64 },
}

impl BaseDistribution {
    pub fn standard_normal() -> Self {
        BaseDistribution::Gaussian {
            sigma: 1.0,
            channel_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierKind {
    None,
    ChannelWise,
    Spike,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub base: BaseDistribution,
    pub kind: OutlierKind,
    /// Outlier columns, used by `ChannelWise` and `Mixed`.
    pub channels: Vec<usize>,
    /// Spike `(token, channel)` cells, used by `Spike` and `Mixed`.
    pub spikes: Vec<(usize, usize)>,
    /// Multiplier for outlier channels, and for spikes unless `spike_magnitude` is set.
    pub magnitude: f64,
    pub spike_magnitude: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub role: Role,
}

impl SyntheticSpec {
    /// Plain base matrix without outliers.
    pub fn plain(rows: usize, cols: usize, base: BaseDistribution, seed: u64) -> Self {
        Self {
            rows,
            cols,
            base,
            kind: OutlierKind::None,
            channels: Vec::new(),
            spikes: Vec::new(),
            magnitude: 1.0,
            spike_magnitude: None,
            seed,
            role: Role::Activation,
        }
    }

    pub fn spike_factor(&self) -> f64 {
        self.spike_magnitude.unwrap_or(self.magnitude)
    }

    pub fn validate(&self) -> Result<()> {
        match self.base {
            BaseDistribution::Gaussian {
                sigma,
                channel_offset,
            } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::validation(format!("sigma must be finite and >= 0, got {sigma}")));
                }
                if !channel_offset.is_finite() {
                    return Err(Error::validation("channel offset must be finite"));
                }
            }
            BaseDistribution::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::validation("constant base value must be finite"));
                }
            }
        }
        for (name, m) in [("magnitude", self.magnitude), ("spike magnitude", self.spike_factor())] {
            if !(m.is_finite() && m >= 1.0) {
                return Err(Error::validation(format!("{name} must be finite and >= 1, got {m}")));
            }
        }
        let uses_channels = matches!(self.kind, OutlierKind::ChannelWise | OutlierKind::Mixed);
        let uses_spikes = matches!(self.kind, OutlierKind::Spike | OutlierKind::Mixed);
        if uses_channels {
            if let Some(&c) = self.channels.iter().find(|&&c| c >= self.cols) {
                return Err(Error::validation(format!(
                    "outlier channel {c} out of range for {} columns",
                    self.cols
                )));
            }
        }
        if uses_spikes {
            if let Some(&(r, c)) = self
                .spikes
                .iter()
                .find(|&&(r, c)| r >= self.rows || c >= self.cols)
            {
                return Err(Error::validation(format!(
                    "spike ({r}, {c}) out of range for a {}x{} matrix",
                    self.rows, self.cols
                )));
            }
        }
        Ok(())
    }
}

/// Generates the matrix described by `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<Matrix> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let mut data = match spec.base {
        BaseDistribution::Constant { value } => vec![value; rows * cols],
        BaseDistribution::Gaussian {
            sigma,
            channel_offset,
        } => {
            let mut rng = stream_rng(spec.seed, VALUE_STREAM);
            let signs: Vec<f64> = (0..cols)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                for sign in &signs {
                    let g: f64 = rng.sample(StandardNormal);
                    data.push(sigma * (g + channel_offset * sign));
                }
            }
            data
        }
    };

    if matches!(spec.kind, OutlierKind::ChannelWise | OutlierKind::Mixed) {
        for &c in &spec.channels {
            for r in 0..rows {
                data[r * cols + c] *= spec.magnitude;
            }
        }
    }
    if matches!(spec.kind, OutlierKind::Spike | OutlierKind::Mixed) {
        let f = spec.spike_factor();
        for &(r, c) in &spec.spikes {
            data[r * cols + c] *= f;
        }
    }
    Matrix::new(rows, cols, data, spec.role)
}

/// `count` distinct channels out of `cols`, sorted ascending.
pub fn random_channels(cols: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > cols {
        return Err(Error::validation(format!(
            "cannot pick {count} distinct channels out of {cols}"
        )));
    }
    let mut rng = stream_rng(seed, LAYOUT_STREAM);
    let mut picked = index::sample(&mut rng, cols, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// One spike in each of `tokens` distinct rows, at a uniformly random column.
/// Sorted by row. Uses a stream separate from [`random_channels`].
pub fn random_spikes(rows: usize, cols: usize, tokens: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if tokens > rows {
        return Err(Error::validation(format!(
            "cannot place spikes in {tokens} distinct tokens out of {rows}"
        )));
    }
    if cols == 0 && tokens > 0 {
        return Err(Error::validation("cannot place spikes in a matrix without columns"));
    }
    let mut rng = stream_rng(seed, LAYOUT_STREAM + 1);
    let mut rows_picked = index::sample(&mut rng, rows, tokens).into_vec();
    rows_picked.sort_unstable();
    Ok(rows_picked
        .into_iter()
        .map(|r| (r, rng.random_range(0..cols)))
        .collect())
}
