use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use rrs_core::gemm::{run_method, Method, MethodConfig};
use rrs_core::quant::{GroupScheme, Precision};
use rrs_core::smooth::SmoothQuantConfig;
use rrs_core::workload::{WorkloadKind, WorkloadSpec};
use rrs_core::{Error, Matrix, Role};

use crate::error::CliResult;
use crate::output::{csv_bytes, fmt_opt, read_input, sibling, write_atomic, write_json, InputDigest, RunManifest};
use crate::{MuArg, WorkloadArg};

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?}; expected rtn, smoothquant, rs, rotate or rrs"))
}

pub const BENCH_COLUMNS: [&str; 10] = [
    "method",
    "a_bits",
    "w_bits",
    "L",
    "rel_frob_error",
    "max_abs_error",
    "mean_mu",
    "p99_mu",
    "status",
    "note",
];

/// CSV columns: method, a_bits, w_bits, L (empty unless the method smooths at
/// runtime), rel_frob_error, max_abs_error, mean_mu, p99_mu, status (ok or
/// skipped), note.
#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Activation tensor file (N×K).
    #[arg(long, requires = "w")]
    x: Option<PathBuf>,
    /// Weight tensor file (M×K).
    #[arg(long, requires = "x")]
    w: Option<PathBuf>,
    /// Built-in seeded workload, used when no tensor files are given.
    #[arg(long, value_enum, conflicts_with_all = ["x", "w"])]
    workload: Option<WorkloadArg>,
    /// Workload seed; defaults to the workload's canonical seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_method,
          default_value = "rtn,smoothquant,rs,rotate,rrs")]
    #[serde(skip)]
    methods: Vec<Method>,
    /// Activation bits (2..=8, or >= 16 to bypass quantization).
    #[arg(long, default_value_t = 4)]
    a_bits: u32,
    /// Weight bits (2..=8, or >= 16 to bypass quantization).
    #[arg(long, default_value_t = 4)]
    w_bits: u32,
    /// Runtime smoothing group sizes L, comma separated; one row each for rs and rrs.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    smooth_group: Vec<usize>,
    /// Activation sub-channel group size; per-channel when absent.
    #[arg(long)]
    a_group: Option<usize>,
    /// Weight sub-channel group size; per-channel when absent.
    #[arg(long)]
    w_group: Option<usize>,
    /// SmoothQuant migration strength.
    #[arg(long, default_value_t = 0.5)]
    sq_alpha: f64,
    /// SmoothQuant calibration activation; the benchmarked activation when absent.
    #[arg(long)]
    sq_calib: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MuArg::Rms)]
    mu: MuArg,
    /// Output CSV; a JSON mirror goes to the same stem with .json.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub a_bits: u32,
    pub w_bits: u32,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub rel_frob_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub mean_mu: Option<f64>,
    pub p99_mu: Option<f64>,
    pub status: &'static str,
    pub note: String,
}

impl BenchRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.a_bits.to_string(),
            self.w_bits.to_string(),
            self.l.map(|l| l.to_string()).unwrap_or_default(),
            fmt_opt(self.rel_frob_error),
            fmt_opt(self.max_abs_error),
            fmt_opt(self.mean_mu),
            fmt_opt(self.p99_mu),
            self.status.to_string(),
            self.note.clone(),
        ]
    }
}

/// Activation and weight from files or a seeded workload.
pub fn operands(
    x: Option<&PathBuf>,
    w: Option<&PathBuf>,
    workload: Option<WorkloadArg>,
    seed: Option<u64>,
) -> CliResult<(Matrix, Matrix, Vec<InputDigest>, Option<u64>)> {
    if let (Some(xp), Some(wp)) = (x, w) {
        let (xm, xd) = read_input(xp, Role::Activation)?;
        let (wm, wd) = read_input(wp, Role::Weight)?;
        return Ok((xm, wm, vec![xd, wd], None));
    }
    let kind: WorkloadKind = workload.unwrap_or(WorkloadArg::Channel).into();
    let seed = seed.unwrap_or(kind.default_seed());
    let (xm, wm) = WorkloadSpec::new(kind, seed)?.generate()?;
    Ok((xm, wm, Vec::new(), Some(seed)))
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let (x, w, mut inputs, seed) = operands(args.x.as_ref(), args.w.as_ref(), args.workload, args.seed)?;
    let a_prec = Precision::from_bits(args.a_bits)?;
    let w_prec = Precision::from_bits(args.w_bits)?;
    let scheme = |g: Option<usize>| g.map_or(GroupScheme::PerChannel, |group_size| GroupScheme::SubChannel { group_size });

    let sq_calibration = match &args.sq_calib {
        Some(p) => {
            let (calib, digest) = read_input(p, Role::Activation)?;
            inputs.push(digest);
            Some(SmoothQuantConfig::calibrate(args.sq_alpha, &calib, &w))
        }
        None => None,
    };

    let mut rows = Vec::new();
    for &method in &args.methods {
        let groups: Vec<Option<usize>> = if method.runtime_smooth() {
            args.smooth_group.iter().map(|&l| Some(l)).collect()
        } else {
            vec![None]
        };
        for l in groups {
            let cfg = MethodConfig {
                a_scheme: scheme(args.a_group),
                w_scheme: scheme(args.w_group),
                smooth_group: l.unwrap_or(1),
                sq_alpha: args.sq_alpha,
                sq_calibration: sq_calibration.clone(),
                mu_kind: args.mu.into(),
                ..MethodConfig::new(method).with_bits(a_prec, w_prec)
            };
            let mut row = BenchRow {
                method: method.name(),
                a_bits: args.a_bits,
                w_bits: args.w_bits,
                l,
                rel_frob_error: None,
                max_abs_error: None,
                mean_mu: None,
                p99_mu: None,
                status: "ok",
                note: String::new(),
            };
            match run_method(&x, &w, &cfg) {
                Ok(r) => {
                    row.rel_frob_error = Some(r.rel_frob_error);
                    row.max_abs_error = Some(r.max_abs_error);
                    row.mean_mu = r.mu.map(|s| s.mean);
                    row.p99_mu = r.mu.map(|s| s.p99);
                }
                Err(e @ Error::UnsupportedDimension { .. }) => {
                    row.status = "skipped";
                    row.note = e.to_string();
                }
                Err(e) => return Err(e.into()),
            }
            rows.push(row);
        }
    }

    let cells: Vec<Vec<String>> = rows.iter().map(BenchRow::cells).collect();
    write_atomic(&args.out, &csv_bytes(&BENCH_COLUMNS, &cells)?)?;
    let json_path = sibling(&args.out, "json");
    write_json(&json_path, &rows)?;

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        args: &'a BenchArgs,
        methods: Vec<&'static str>,
    }
    let mut manifest = RunManifest::new(
        "bench",
        Config {
            args: &args,
            methods: args.methods.iter().map(|m| m.name()).collect(),
        },
        seed,
    );
    manifest.inputs = inputs;
    manifest.outputs = vec![args.out.display().to_string(), json_path.display().to_string()];
    manifest.write_beside(&args.out)?;
    eprintln!("wrote {} ({} rows)", args.out.display(), rows.len());
    Ok(())
}
