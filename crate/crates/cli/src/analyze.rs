use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use rrs_core::analysis::{mu_report, spike_census, CensusReport, MuKind, Transform};
use rrs_core::rotation::{less_smooth_probability, HadamardRotation, LessSmoothReport};
use rrs_core::workload::{WorkloadKind, WorkloadSpec};
use rrs_core::{Error, Role};

use crate::error::CliResult;
use crate::output::{csv_bytes, fmt_f64, fmt_opt, read_input, sibling, write_atomic, write_json, RunManifest};
use crate::{MuArg, WorkloadArg};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformArg {
    None,
    Rotate,
    Rs,
    Rrs,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::None => Transform::None,
            TransformArg::Rotate => Transform::Rotate,
            TransformArg::Rs => Transform::Rs,
            TransformArg::Rrs => Transform::Rrs,
        }
    }
}

pub const MU_COLUMNS: [&str; 9] = [
    "transform", "tokens", "mean_mu", "median_mu", "p99_mu", "min_mu", "max_mu", "status", "note",
];
pub const CENSUS_COLUMNS: [&str; 3] = ["ratio_above", "ratio_at_most", "count"];
pub const ROTATION_COLUMNS: [&str; 4] = ["mu", "less_smooth_probability", "tokens", "zero_tokens"];

/// Main CSV columns: transform, tokens, mean_mu, median_mu, p99_mu, min_mu,
/// max_mu, status, note. `--census-bins` adds <stem>.census.csv with columns
/// ratio_above, ratio_at_most (empty for the open last bin), count.
/// `--rotate` adds <stem>.rotation.csv with columns mu,
/// less_smooth_probability, tokens, zero_tokens.
#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Activation tensor file.
    #[arg(long, conflicts_with = "workload")]
    input: Option<PathBuf>,
    /// Built-in seeded workload activation, used when no input is given.
    #[arg(long, value_enum)]
    workload: Option<WorkloadArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Transforms applied before measuring, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none,rotate,rs,rrs")]
    transforms: Vec<TransformArg>,
    #[arg(long, value_enum, default_value_t = MuArg::Rms)]
    mu: MuArg,
    /// Runtime smoothing group size for rs and rrs.
    #[arg(long, default_value_t = 1)]
    smooth_group: usize,
    /// Ascending |x|/median(|t|) thresholds for the spike census, comma separated.
    #[arg(long, value_delimiter = ',')]
    census_bins: Vec<f64>,
    /// Also report the probability that rotation makes a token less smooth.
    #[arg(long)]
    rotate: bool,
    /// Output CSV path.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct MuCsvRow {
    transform: &'static str,
    tokens: Option<usize>,
    mean_mu: Option<f64>,
    median_mu: Option<f64>,
    p99_mu: Option<f64>,
    min_mu: Option<f64>,
    max_mu: Option<f64>,
    status: &'static str,
    note: String,
}

#[derive(Debug, Serialize)]
struct Report {
    mu: Vec<MuCsvRow>,
    census: Option<CensusReport>,
    rotation: Option<LessSmoothReport>,
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let (x, inputs, seed) = match &args.input {
        Some(p) => {
            let (m, d) = read_input(p, Role::Activation)?;
            (m, vec![d], None)
        }
        None => {
            let kind: WorkloadKind = args.workload.unwrap_or(WorkloadArg::Channel).into();
            let seed = args.seed.unwrap_or(kind.default_seed());
            (WorkloadSpec::new(kind, seed)?.generate()?.0, Vec::new(), Some(seed))
        }
    };
    let kind: MuKind = args.mu.into();

    let mut mu_rows = Vec::new();
    for &t in &args.transforms {
        let t: Transform = t.into();
        let mut row = MuCsvRow {
            transform: t.name(),
            tokens: None,
            mean_mu: None,
            median_mu: None,
            p99_mu: None,
            min_mu: None,
            max_mu: None,
            status: "ok",
            note: String::new(),
        };
        match mu_report(&x, &[t], kind, args.smooth_group) {
            Ok(r) => {
                let s = r[0].summary;
                row.tokens = Some(s.count);
                row.mean_mu = Some(s.mean);
                row.median_mu = Some(s.median);
                row.p99_mu = Some(s.p99);
                row.min_mu = Some(s.min);
                row.max_mu = Some(s.max);
            }
            Err(e @ Error::UnsupportedDimension { .. }) => {
                row.status = "skipped";
                row.note = e.to_string();
            }
            Err(e) => return Err(e.into()),
        }
        mu_rows.push(row);
    }
    let cells: Vec<Vec<String>> = mu_rows
        .iter()
        .map(|r| {
            vec![
                r.transform.to_string(),
                r.tokens.map(|t| t.to_string()).unwrap_or_default(),
                fmt_opt(r.mean_mu),
                fmt_opt(r.median_mu),
                fmt_opt(r.p99_mu),
                fmt_opt(r.min_mu),
                fmt_opt(r.max_mu),
                r.status.to_string(),
                r.note.clone(),
            ]
        })
        .collect();
    write_atomic(&args.out, &csv_bytes(&MU_COLUMNS, &cells)?)?;
    let mut outputs = vec![args.out.clone()];

    let census = if args.census_bins.is_empty() {
        None
    } else {
        let c = spike_census(&x, &args.census_bins)?;
        let cells: Vec<Vec<String>> = c
            .counts
            .iter()
            .enumerate()
            .map(|(i, n)| {
                vec![
                    fmt_f64(c.thresholds[i]),
                    c.thresholds.get(i + 1).map(|&t| fmt_f64(t)).unwrap_or_default(),
                    n.to_string(),
                ]
            })
            .collect();
        let path = sibling(&args.out, "census.csv");
        write_atomic(&path, &csv_bytes(&CENSUS_COLUMNS, &cells)?)?;
        outputs.push(path);
        if c.skipped_tokens > 0 {
            eprintln!("census skipped {} tokens with zero median magnitude", c.skipped_tokens);
        }
        Some(c)
    };

    let rotation = if args.rotate {
        let r = less_smooth_probability(&x, &HadamardRotation::new(x.cols())?, kind)?;
        let cells = vec![vec![
            kind.name().to_string(),
            fmt_f64(r.probability),
            r.counted.to_string(),
            r.zero_tokens.to_string(),
        ]];
        let path = sibling(&args.out, "rotation.csv");
        write_atomic(&path, &csv_bytes(&ROTATION_COLUMNS, &cells)?)?;
        outputs.push(path);
        Some(r)
    } else {
        None
    };

    let json_path = sibling(&args.out, "json");
    write_json(
        &json_path,
        &Report {
            mu: mu_rows,
            census,
            rotation,
        },
    )?;
    outputs.push(json_path);

    let mut manifest = RunManifest::new("analyze", &args, seed);
    manifest.inputs = inputs;
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    manifest.write_beside(&args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
