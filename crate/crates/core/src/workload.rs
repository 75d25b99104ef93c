//! Canonical seeded workloads shared by tests, benchmarks and the CLI.
//!
//! * channel-wise: `X` 256×2048 with a consistent per-channel sign offset of
//!   1.0 and 8 outlier channels ×50; `W` 128×2048 standard normal.
//! * spike: `X` 512×256 with offset 2.0, 4 outlier channels ×20 and one ×20
//!   spike in every token; `W` 384×256 standard normal.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::synthetic::{generate, random_channels, random_spikes, BaseDistribution, OutlierKind, SyntheticSpec};
use crate::tensor::{Matrix, Role};

pub const CHANNEL_SEED: u64 = 7;
pub const SPIKE_SEED: u64 = 7;

/// Mixed into the activation seed to derive the weight seed.
const WEIGHT_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Channel,
    Spike,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Channel => "channel",
            WorkloadKind::Spike => "spike",
        }
    }

    pub fn default_seed(self) -> u64 {
        match self {
            WorkloadKind::Channel => CHANNEL_SEED,
            WorkloadKind::Spike => SPIKE_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub x: SyntheticSpec,
    pub w: SyntheticSpec,
}

pub fn weight_spec(rows: usize, cols: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        role: Role::Weight,
        ..SyntheticSpec::plain(rows, cols, BaseDistribution::standard_normal(), seed ^ WEIGHT_SEED_SALT)
    }
}

/// `rows×cols` activation with `channels` random outlier columns scaled by `magnitude`.
pub fn channel_outlier_spec(
    rows: usize,
    cols: usize,
    channels: usize,
    magnitude: f64,
    channel_offset: f64,
    seed: u64,
) -> Result<SyntheticSpec> {
    Ok(SyntheticSpec {
        kind: OutlierKind::ChannelWise,
        channels: random_channels(cols, channels, seed)?,
        magnitude,
        ..SyntheticSpec::plain(
            rows,
            cols,
            BaseDistribution::Gaussian {
                sigma: 1.0,
                channel_offset,
            },
            seed,
        )
    })
}

pub fn channel_workload(seed: u64) -> Result<WorkloadSpec> {
    Ok(WorkloadSpec {
        kind: WorkloadKind::Channel,
        x: channel_outlier_spec(256, 2048, 8, 50.0, 1.0, seed)?,
        w: weight_spec(128, 2048, seed),
    })
}

pub fn spike_workload(seed: u64) -> Result<WorkloadSpec> {
    let (rows, cols) = (512, 256);
    Ok(WorkloadSpec {
        kind: WorkloadKind::Spike,
        x: SyntheticSpec {
            kind: OutlierKind::Mixed,
            channels: random_channels(cols, 4, seed)?,
            spikes: random_spikes(rows, cols, rows, seed)?,
            magnitude: 20.0,
            spike_magnitude: Some(20.0),
            ..SyntheticSpec::plain(
                rows,
                cols,
                BaseDistribution::Gaussian {
                    sigma: 1.0,
                    channel_offset: 2.0,
                },
                seed,
            )
        },
        w: weight_spec(384, cols, seed),
    })
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, seed: u64) -> Result<Self> {
        match kind {
            WorkloadKind::Channel => channel_workload(seed),
            WorkloadKind::Spike => spike_workload(seed),
        }
    }

    pub fn generate(&self) -> Result<(Matrix, Matrix)> {
        Ok((generate(&self.x)?, generate(&self.w)?))
    }
}
