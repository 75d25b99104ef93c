use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use rrs_core::gemm::gemm_check_suite;

use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, fmt_f64, write_atomic, RunManifest};

/// Relative Frobenius tolerance between fused and naive outputs.
pub const TOLERANCE: f64 = 1e-9;

/// Prints the largest fused-vs-naive deviation; exits 4 above 1e-9.
/// With `-o`, writes one CSV row per case: n, m, k, block_size, bits, rel_diff.
#[derive(Debug, Args, Serialize)]
pub struct GemmCheckArgs {
    /// Number of random shape and block-size cases.
    #[arg(long, default_value_t = 30)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional per-case CSV report.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub fn run(args: GemmCheckArgs) -> CliResult<()> {
    let cases = gemm_check_suite(args.cases, args.seed)?;
    let worst = cases.iter().map(|c| c.rel_diff).fold(0.0, f64::max);
    println!("cases: {}", cases.len());
    println!("max relative deviation: {}", fmt_f64(worst));

    if let Some(out) = &args.out {
        let cells: Vec<Vec<String>> = cases
            .iter()
            .map(|c| {
                vec![
                    c.n.to_string(),
                    c.m.to_string(),
                    c.k.to_string(),
                    c.block_size.to_string(),
                    c.bits.to_string(),
                    fmt_f64(c.rel_diff),
                ]
            })
            .collect();
        write_atomic(out, &csv_bytes(&["n", "m", "k", "block_size", "bits", "rel_diff"], &cells)?)?;
        let mut manifest = RunManifest::new("gemm-check", &args, Some(args.seed));
        manifest.outputs = vec![out.display().to_string()];
        manifest.write_beside(out)?;
    }

    if worst > TOLERANCE {
        return Err(CliError::Numerical(format!(
            "fused output deviates from the naive reference by {worst:e} (tolerance {TOLERANCE:e})"
        )));
    }
    Ok(())
}
