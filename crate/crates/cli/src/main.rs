//! `rrs`: experiments for runtime-smoothed INT4 quantization.

mod analyze;
mod bench;
mod error;
mod gemm_check;
mod gen;
mod output;
mod victims;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rrs_core::analysis::MuKind;
use rrs_core::workload::WorkloadKind;

#[derive(Parser)]
#[command(name = "rrs", version, about = "INT4 quantization experiments with runtime smoothing and Hadamard rotation")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "RRS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic activation or weight tensor.
    Gen(gen::GenArgs),
    /// Compare quantization methods on one matmul and report errors.
    Bench(bench::BenchArgs),
    /// Report token smoothness, spike census and rotation effects.
    Analyze(analyze::AnalyzeArgs),
    /// Monte Carlo victim simulation over numbers of spike tokens.
    Victims(victims::VictimsArgs),
    /// Check the fused blocked GEMM against the naive reference.
    GemmCheck(gemm_check::GemmCheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MuArg {
    Rms,
    L2,
}

impl From<MuArg> for MuKind {
    fn from(m: MuArg) -> Self {
        match m {
            MuArg::Rms => MuKind::Rms,
            MuArg::L2 => MuKind::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadArg {
    Channel,
    Spike,
}

impl From<WorkloadArg> for WorkloadKind {
    fn from(w: WorkloadArg) -> Self {
        match w {
            WorkloadArg::Channel => WorkloadKind::Channel,
            WorkloadArg::Spike => WorkloadKind::Spike,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignore the error when a pool already exists; results do not depend on it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Victims(a) => victims::run(a),
        Command::GemmCheck(a) => gemm_check::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
