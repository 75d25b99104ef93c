//! Smoothness metrics, spike census and the victim simulation.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::HadamardRotation;
use crate::smooth::{apply_smooth, build_plan, channel_max_scales};
use crate::stats::{median_abs, Summary};
use crate::synthetic::stream_rng;
use crate::tensor::Matrix;

/// Which normalizer the smoothness metric uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuKind {
    /// `absmax(t) / RMS(t)`, in `[1, √K]`.
    Rms,
    /// `absmax(t) / ‖t‖₂`, in `[1/√K, 1]`.
    L2,
}

impl MuKind {
    pub fn name(self) -> &'static str {
        match self {
            MuKind::Rms => "rms",
            MuKind::L2 => "l2",
        }
    }
}

/// Smoothness of a token; lower is flatter.
pub fn mu(t: &[f64], kind: MuKind) -> Result<f64> {
    let absmax = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if absmax == 0.0 {
        return Err(Error::UndefinedMetric(
            "smoothness of an all-zero token".into(),
        ));
    }
    // scaling by absmax first keeps the sum of squares away from overflow
    let sumsq: f64 = t.iter().map(|v| (v / absmax) * (v / absmax)).sum();
    Ok(match kind {
        MuKind::Rms => 1.0 / (sumsq / t.len() as f64).sqrt(),
        MuKind::L2 => 1.0 / sumsq.sqrt(),
    })
}

/// μ of every row of `x`.
pub fn token_mus(x: &Matrix, kind: MuKind) -> Result<Vec<f64>> {
    x.row_iter()
        .enumerate()
        .map(|(i, t)| {
            mu(t, kind).map_err(|_| {
                Error::UndefinedMetric(format!("token {i} is all zeros"))
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    None,
    Rotate,
    Rs,
    Rrs,
}

impl Transform {
    pub const ALL: [Transform; 4] = [Transform::None, Transform::Rotate, Transform::Rs, Transform::Rrs];

    pub fn name(self) -> &'static str {
        match self {
            Transform::None => "none",
            Transform::Rotate => "rotate",
            Transform::Rs => "rs",
            Transform::Rrs => "rrs",
        }
    }
}

/// The activation as the quantizer would see it after `transform`.
pub fn transform_activation(x: &Matrix, transform: Transform, smooth_group: usize) -> Result<Matrix> {
    let rotate = |m: &Matrix| HadamardRotation::new(m.cols())?.rotate_rows(m);
    let smooth = |m: &Matrix| {
        let plan = build_plan(&channel_max_scales(m), smooth_group)?;
        apply_smooth(m, &plan)
    };
    match transform {
        Transform::None => Ok(x.clone()),
        Transform::Rotate => rotate(x),
        Transform::Rs => smooth(x),
        Transform::Rrs => smooth(&rotate(x)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub transform: Transform,
    pub summary: Summary,
}

/// Per-transform summary of token μ.
pub fn mu_report(
    x: &Matrix,
    transforms: &[Transform],
    kind: MuKind,
    smooth_group: usize,
) -> Result<Vec<MuRow>> {
    if x.rows() == 0 {
        return Err(Error::UndefinedMetric("matrix has no tokens".into()));
    }
    transforms
        .iter()
        .map(|&t| {
            let mus = token_mus(&transform_activation(x, t, smooth_group)?, kind)?;
            Ok(MuRow {
                transform: t,
                summary: Summary::of(&mus).expect("non-empty"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub thresholds: Vec<f64>,
    /// `counts[i]` holds ratios in `(thresholds[i], thresholds[i+1]]`; the last
    /// bin is open-ended.
    pub counts: Vec<u64>,
    /// Tokens whose median absolute value is zero.
    pub skipped_tokens: usize,
}

/// Counts elements by `|x| / median(|t|)` within their token.
pub fn spike_census(x: &Matrix, thresholds: &[f64]) -> Result<CensusReport> {
    if thresholds.is_empty() {
        return Err(Error::validation("census needs at least one threshold"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("census thresholds must be finite and strictly increasing"));
    }
    let mut counts = vec![0u64; thresholds.len()];
    let mut skipped_tokens = 0;
    for t in x.row_iter() {
        let med = median_abs(t);
        if med == 0.0 {
            skipped_tokens += 1;
            continue;
        }
        for v in t {
            let ratio = v.abs() / med;
            // number of thresholds strictly below the ratio
            let above = thresholds.partition_point(|&th| th < ratio);
            if above > 0 {
                counts[above - 1] += 1;
            }
        }
    }
    Ok(CensusReport {
        thresholds: thresholds.to_vec(),
        counts,
        skipped_tokens,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpikeMagnitude {
    /// `exp(U(ln lo, ln hi))`.
    LogUniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimSimConfig {
    pub dim: usize,
    /// Number of spike tokens `l` stacked per trial.
    pub spike_tokens: usize,
    /// Inclusive range for the number of spikes in each token, drawn uniformly.
    pub spikes_per_token: (usize, usize),
    pub magnitude: SpikeMagnitude,
    pub trials: usize,
    pub seed: u64,
}

impl VictimSimConfig {
    /// Defaults: 2 to 4 spikes per token, magnitudes log-uniform on `[100, 1000]`.
    pub fn new(dim: usize, spike_tokens: usize, trials: usize, seed: u64) -> Self {
        Self {
            dim,
            spike_tokens,
            spikes_per_token: (2, 4),
            magnitude: SpikeMagnitude::LogUniform { lo: 100.0, hi: 1000.0 },
            trials,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        HadamardRotation::new(self.dim)?;
        if self.spike_tokens == 0 {
            return Err(Error::validation("number of spike tokens must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::validation("number of trials must be >= 1"));
        }
        let (lo, hi) = self.spikes_per_token;
        if lo == 0 || lo > hi || hi > self.dim {
            return Err(Error::validation(format!(
                "spikes per token range {lo}..={hi} invalid for dimension {}",
                self.dim
            )));
        }
        match self.magnitude {
            SpikeMagnitude::LogUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                    return Err(Error::validation(format!(
                        "log-uniform magnitude range [{lo}, {hi}] invalid"
                    )));
                }
            }
            SpikeMagnitude::Fixed { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::validation(format!("spike magnitude {value} invalid")));
                }
            }
        }
        Ok(())
    }
}

/// `u` for one trial: stack `l` rotated spike tokens, take the channel-wise
/// abs-max floored at 1 as the smoothing scale, smooth an all-ones token and
/// return `max|x| / RMS(x)`.
fn victim_trial(cfg: &VictimSimConfig, rot: &HadamardRotation, trial: usize) -> f64 {
    let k = cfg.dim;
    let mut rng = stream_rng(cfg.seed, trial as u64);
    let mut scale = vec![1.0_f64; k];
    let mut token = vec![0.0_f64; k];
    for _ in 0..cfg.spike_tokens {
        token.fill(0.0);
        let (lo, hi) = cfg.spikes_per_token;
        let n = rng.random_range(lo..=hi);
        for pos in index::sample(&mut rng, k, n) {
            let magnitude = match cfg.magnitude {
                SpikeMagnitude::LogUniform { lo, hi } => {
                    (rng.random::<f64>() * (hi.ln() - lo.ln()) + lo.ln()).exp()
                }
                SpikeMagnitude::Fixed { value } => value,
            };
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            token[pos] = sign * magnitude;
        }
        rot.rotate_in_place(&mut token).expect("dimension checked");
        for (s, v) in scale.iter_mut().zip(&token) {
            *s = s.max(v.abs());
        }
    }
    let smoothed: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    mu(&smoothed, MuKind::Rms).expect("smoothed token is positive")
}

/// Raw `u` values, one per trial, in trial order.
pub fn victim_samples(cfg: &VictimSimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let rot = HadamardRotation::new(cfg.dim)?;
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|t| victim_trial(cfg, &rot, t))
        .collect())
}

/// Summary of `u` over all trials.
pub fn victim_sim(cfg: &VictimSimConfig) -> Result<Summary> {
    Ok(Summary::of(&victim_samples(cfg)?).expect("trials >= 1"))
}

/// Runs [`victim_sim`] for every `l` in `spike_tokens`, other settings from `base`.
pub fn victim_sweep(base: &VictimSimConfig, spike_tokens: &[usize]) -> Result<Vec<(usize, Summary)>> {
    spike_tokens
        .iter()
        .map(|&l| {
            let cfg = VictimSimConfig {
                spike_tokens: l,
                ..base.clone()
            };
            Ok((l, victim_sim(&cfg)?))
        })
        .collect()
}
