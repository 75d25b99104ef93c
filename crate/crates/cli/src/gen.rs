use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use rrs_core::synthetic::{generate, random_channels, random_spikes, BaseDistribution, OutlierKind, SyntheticSpec};
use rrs_core::tensor_file::{write_tensor, ElementType};
use rrs_core::Role;

use crate::error::{CliError, CliResult};
use crate::output::{write_atomic, RunManifest};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseArg {
    Gaussian,
    Constant,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierArg {
    None,
    Channel,
    Spike,
    Mixed,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DtypeArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleArg {
    Activation,
    Weight,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(':')
        .ok_or_else(|| format!("expected TOKEN:CHANNEL, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(r)?, num(c)?))
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Number of tokens (rows).
    #[arg(long)]
    rows: usize,
    /// Hidden dimension (columns).
    #[arg(long)]
    cols: usize,
    /// Base distribution.
    #[arg(long, value_enum, default_value_t = BaseArg::Gaussian)]
    base: BaseArg,
    /// Gaussian standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Per-channel consistent offset, in units of sigma, with a random sign per channel.
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Entry value of the constant base.
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    /// Outlier pattern.
    #[arg(long, value_enum, default_value_t = OutlierArg::None)]
    outlier: OutlierArg,
    /// Number of randomly placed outlier channels.
    #[arg(long, conflicts_with = "channel_list")]
    channels: Option<usize>,
    /// Explicit outlier channels, comma separated.
    #[arg(long, value_delimiter = ',')]
    channel_list: Vec<usize>,
    /// Number of tokens that receive one spike at a random channel.
    #[arg(long, conflicts_with = "spike_cells")]
    spike_tokens: Option<usize>,
    /// Explicit spike cells as TOKEN:CHANNEL, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_cell)]
    spike_cells: Vec<(usize, usize)>,
    /// Outlier multiplier (>= 1).
    #[arg(long, default_value_t = 1.0)]
    mag: f64,
    /// Spike multiplier; defaults to --mag.
    #[arg(long)]
    spike_mag: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Element type on disk.
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
    #[arg(long, value_enum, default_value_t = RoleArg::Activation)]
    role: RoleArg,
    /// Output tensor path; the manifest goes to <OUT>.manifest.json.
    #[arg(short, long)]
    out: PathBuf,
}

impl GenArgs {
    fn spec(&self) -> CliResult<SyntheticSpec> {
        let base = match self.base {
            BaseArg::Gaussian => BaseDistribution::Gaussian {
                sigma: self.sigma,
                channel_offset: self.offset,
            },
            BaseArg::Constant => BaseDistribution::Constant { value: self.value },
        };
        let kind = match self.outlier {
            OutlierArg::None => OutlierKind::None,
            OutlierArg::Channel => OutlierKind::ChannelWise,
            OutlierArg::Spike => OutlierKind::Spike,
            OutlierArg::Mixed => OutlierKind::Mixed,
        };
        let channels = match self.channels {
            Some(n) => random_channels(self.cols, n, self.seed)?,
            None => self.channel_list.clone(),
        };
        let spikes = match self.spike_tokens {
            Some(n) => random_spikes(self.rows, self.cols, n, self.seed)?,
            None => self.spike_cells.clone(),
        };
        Ok(SyntheticSpec {
            rows: self.rows,
            cols: self.cols,
            base,
            kind,
            channels,
            spikes,
            magnitude: self.mag,
            spike_magnitude: self.spike_mag,
            seed: self.seed,
            role: match self.role {
                RoleArg::Activation => Role::Activation,
                RoleArg::Weight => Role::Weight,
            },
        })
    }
}

pub fn run(args: GenArgs) -> CliResult<()> {
    let spec = args.spec()?;
    let m = generate(&spec)?;
    let dtype = match args.dtype {
        DtypeArg::F32 => ElementType::F32,
        DtypeArg::F64 => ElementType::F64,
    };
    let mut bytes = Vec::new();
    write_tensor(&m, dtype, &mut bytes).map_err(|e| CliError::Encode(e.to_string()))?;
    write_atomic(&args.out, &bytes)?;

    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a GenArgs,
        resolved: &'a SyntheticSpec,
    }
    let mut manifest = RunManifest::new(
        "gen",
        Config {
            args: &args,
            resolved: &spec,
        },
        Some(args.seed),
    );
    manifest.outputs.push(args.out.display().to_string());
    manifest.write_beside(&args.out)?;
    eprintln!("wrote {} ({}x{})", args.out.display(), m.rows(), m.cols());
    Ok(())
}
