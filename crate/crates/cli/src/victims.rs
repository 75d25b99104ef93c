use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use rrs_core::analysis::{victim_sweep, SpikeMagnitude, VictimSimConfig};

use crate::error::CliResult;
use crate::output::{csv_bytes, fmt_f64, sibling, write_atomic, write_json, RunManifest};

pub const VICTIM_COLUMNS: [&str; 7] = ["spike_tokens", "trials", "mean_u", "median_u", "p95_u", "p99_u", "max_u"];

/// CSV columns: spike_tokens, trials, mean_u, median_u, p95_u, p99_u, max_u.
/// `u` is max|x|/RMS(x) of an all-ones token after smoothing by the stacked
/// rotated spike tokens.
#[derive(Debug, Args, Serialize)]
pub struct VictimsArgs {
    /// Token length K (power of two).
    #[arg(long, default_value_t = 4096)]
    k: usize,
    /// Numbers of spike tokens l to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    l: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Lower end of the log-uniform spike magnitude range.
    #[arg(long, default_value_t = 100.0)]
    mag_lo: f64,
    /// Upper end of the log-uniform spike magnitude range.
    #[arg(long, default_value_t = 1000.0)]
    mag_hi: f64,
    /// Use this fixed magnitude instead of the log-uniform range.
    #[arg(long)]
    mag_fixed: Option<f64>,
    /// Minimum spikes per token.
    #[arg(long, default_value_t = 2)]
    spikes_min: usize,
    /// Maximum spikes per token.
    #[arg(long, default_value_t = 4)]
    spikes_max: usize,
    /// Output CSV path.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Row {
    spike_tokens: usize,
    trials: usize,
    mean_u: f64,
    median_u: f64,
    p95_u: f64,
    p99_u: f64,
    max_u: f64,
}

pub fn run(args: VictimsArgs) -> CliResult<()> {
    let base = VictimSimConfig {
        spikes_per_token: (args.spikes_min, args.spikes_max),
        magnitude: match args.mag_fixed {
            Some(value) => SpikeMagnitude::Fixed { value },
            None => SpikeMagnitude::LogUniform {
                lo: args.mag_lo,
                hi: args.mag_hi,
            },
        },
        ..VictimSimConfig::new(args.k, 1, args.trials, args.seed)
    };
    let rows: Vec<Row> = victim_sweep(&base, &args.l)?
        .into_iter()
        .map(|(l, s)| Row {
            spike_tokens: l,
            trials: s.count,
            mean_u: s.mean,
            median_u: s.median,
            p95_u: s.p95,
            p99_u: s.p99,
            max_u: s.max,
        })
        .collect();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.spike_tokens.to_string(),
                r.trials.to_string(),
                fmt_f64(r.mean_u),
                fmt_f64(r.median_u),
                fmt_f64(r.p95_u),
                fmt_f64(r.p99_u),
                fmt_f64(r.max_u),
            ]
        })
        .collect();
    write_atomic(&args.out, &csv_bytes(&VICTIM_COLUMNS, &cells)?)?;
    let json_path = sibling(&args.out, "json");
    write_json(&json_path, &rows)?;

    let mut manifest = RunManifest::new("victims", &args, Some(args.seed));
    manifest.outputs = vec![args.out.display().to_string(), json_path.display().to_string()];
    manifest.write_beside(&args.out)?;
    eprintln!("wrote {} ({} rows)", args.out.display(), rows.len());
    Ok(())
}
