//! Matrix-multiplication back-ends and method pipelines.
//!
//! All products are `Y = X·Wᵀ` with `X: N×K`, `W: M×K`. Every back-end fixes
//! its summation order (ascending `j` inside a block, ascending block) and
//! parallelizes across output rows only, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{mu, MuKind};
use crate::error::{Error, Result};
use crate::quant::{dequantize, qmax, quantize, GroupScheme, Precision, QuantizedMatrix};
use crate::rotation::HadamardRotation;
use crate::smooth::{
    apply_perm_to_weight, apply_smooth, build_plan, channel_max_scales, smoothquant_apply,
    smoothquant_scales, SmoothQuantConfig, SmoothingPlan,
};
use crate::stats::Summary;
use crate::tensor::{Matrix, Role};

fn check_k(op: &'static str, xk: usize, wk: usize) -> Result<()> {
    if xk != wk {
        return Err(Error::shape(op, format!("X has K={xk}, W has K={wk}")));
    }
    Ok(())
}

/// Fills an `n × m` output row-parallel from `f(row, col)`.
fn build_output(n: usize, m: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Matrix> {
    let mut data = vec![0.0; n * m];
    if m > 0 {
        data.par_chunks_mut(m).enumerate().for_each(|(r, out)| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = f(r, c);
            }
        });
    }
    Matrix::new(n, m, data, Role::Output)
}

/// Float oracle `X·Wᵀ`.
pub fn matmul_fp(x: &Matrix, w: &Matrix) -> Result<Matrix> {
    check_k("matmul_fp", x.cols(), w.cols())?;
    build_output(x.rows(), w.rows(), |r, c| {
        x.row(r).iter().zip(w.row(c)).fold(0.0, |acc, (a, b)| acc + a * b)
    })
}

/// One scale per row, broadcasting a per-tensor scale.
fn per_row_scales(q: &QuantizedMatrix, op: &'static str) -> Result<Vec<f64>> {
    match q.scheme() {
        GroupScheme::PerTensor => Ok(vec![q.scales()[0]; q.rows()]),
        _ => q.row_scales().map(<[f64]>::to_vec).ok_or_else(|| {
            Error::config(format!(
                "{op} needs one quantization scale per row, got {:?}",
                q.scheme()
            ))
        }),
    }
}

/// `Y[n,m] = αx[n]·αw[m]·Σ_j s_j·X̂[n,j]·Ŵ[m,j]`, with `s_j = 1` when `s` is `None`.
pub fn matmul_quant_naive(
    xq: &QuantizedMatrix,
    wq: &QuantizedMatrix,
    s: Option<&[f64]>,
) -> Result<Matrix> {
    check_k("matmul_quant_naive", xq.cols(), wq.cols())?;
    let ax = per_row_scales(xq, "matmul_quant_naive")?;
    let aw = per_row_scales(wq, "matmul_quant_naive")?;
    let ones;
    let s = match s {
        Some(s) => {
            if s.len() != xq.cols() {
                return Err(Error::shape(
                    "matmul_quant_naive",
                    format!("{} smoothing scales for K={}", s.len(), xq.cols()),
                ));
            }
            s
        }
        None => {
            ones = vec![1.0; xq.cols()];
            &ones
        }
    };
    build_output(xq.rows(), wq.rows(), |r, c| {
        let acc = xq
            .int_row(r)
            .iter()
            .zip(wq.int_row(c))
            .zip(s)
            .fold(0.0, |acc, ((&a, &b), &sj)| acc + sj * (a as i32 * b as i32) as f64);
        ax[r] * aw[c] * acc
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedGemmConfig {
    pub block_size: usize,
}

/// Blocked GEMM with one runtime scale per block.
///
/// Operands must already be permuted by `plan`. Each block accumulates an
/// `i32` partial `P_b`; the output is `(Σ_b g_b·P_b)·αx[n]·αw[m]`.
pub fn matmul_fused_blocked(
    xq: &QuantizedMatrix,
    wq: &QuantizedMatrix,
    plan: &SmoothingPlan,
    cfg: BlockedGemmConfig,
) -> Result<Matrix> {
    check_k("matmul_fused_blocked", xq.cols(), wq.cols())?;
    let k = xq.cols();
    if plan.dim() != k {
        return Err(Error::shape(
            "matmul_fused_blocked",
            format!("plan over {} channels for K={k}", plan.dim()),
        ));
    }
    let b = cfg.block_size;
    if b == 0 || b != plan.group_size() {
        return Err(Error::config(format!(
            "block size {b} does not match smoothing group size {}",
            plan.group_size()
        )));
    }
    let worst = b as i64 * qmax(xq.bits()) as i64 * qmax(wq.bits()) as i64;
    if worst > i32::MAX as i64 {
        return Err(Error::config(format!(
            "block size {b} can overflow a 32-bit accumulator"
        )));
    }
    let ax = per_row_scales(xq, "matmul_fused_blocked")?;
    let aw = per_row_scales(wq, "matmul_fused_blocked")?;
    let g = plan.group_scales();
    build_output(xq.rows(), wq.rows(), |r, c| {
        let xr = xq.int_row(r);
        let wr = wq.int_row(c);
        let mut acc = 0.0;
        for (blk, (xb, wb)) in xr.chunks(b).zip(wr.chunks(b)).enumerate() {
            let partial: i32 = xb
                .iter()
                .zip(wb)
                .fold(0i32, |p, (&a, &w)| p + a as i32 * w as i32);
            acc += g[blk] * partial as f64;
        }
        acc * (ax[r] * aw[c])
    })
}

/// Float counterpart of [`matmul_fused_blocked`]: `Σ_b g_b·Σ_{j∈b} x·w`.
pub fn matmul_blocked_float(x: &Matrix, w: &Matrix, plan: &SmoothingPlan) -> Result<Matrix> {
    check_k("matmul_blocked_float", x.cols(), w.cols())?;
    if plan.dim() != x.cols() {
        return Err(Error::shape(
            "matmul_blocked_float",
            format!("plan over {} channels for K={}", plan.dim(), x.cols()),
        ));
    }
    let b = plan.group_size();
    let g = plan.group_scales();
    build_output(x.rows(), w.rows(), |r, c| {
        let mut acc = 0.0;
        for (blk, (xb, wb)) in x.row(r).chunks(b).zip(w.row(c).chunks(b)).enumerate() {
            let partial = xb.iter().zip(wb).fold(0.0, |p, (a, w)| p + a * w);
            acc += g[blk] * partial;
        }
        acc
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rtn,
    SmoothQuant,
    Rs,
    Rotate,
    Rrs,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Rtn,
        Method::SmoothQuant,
        Method::Rs,
        Method::Rotate,
        Method::Rrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rtn => "rtn",
            Method::SmoothQuant => "smoothquant",
            Method::Rs => "rs",
            Method::Rotate => "rotate",
            Method::Rrs => "rrs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn rotates(self) -> bool {
        matches!(self, Method::Rotate | Method::Rrs)
    }

    pub fn runtime_smooth(self) -> bool {
        matches!(self, Method::Rs | Method::Rrs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub a_bits: Precision,
    pub w_bits: Precision,
    pub a_scheme: GroupScheme,
    pub w_scheme: GroupScheme,
    /// Runtime smoothing group size `L`, also the GEMM block size.
    pub smooth_group: usize,
    pub sq_alpha: f64,
    /// Offline SmoothQuant calibration; the live activation's maxima when `None`.
    pub sq_calibration: Option<SmoothQuantConfig>,
    pub mu_kind: MuKind,
}

impl MethodConfig {
    /// A4W4, per-channel operands, `L = 1`, SmoothQuant `α = 0.5`.
    pub fn new(method: Method) -> Self {
        Self {
            method,
            a_bits: Precision::Int(4),
            w_bits: Precision::Int(4),
            a_scheme: GroupScheme::PerChannel,
            w_scheme: GroupScheme::PerChannel,
            smooth_group: 1,
            sq_alpha: 0.5,
            sq_calibration: None,
            mu_kind: MuKind::Rms,
        }
    }

    pub fn with_bits(mut self, a: Precision, w: Precision) -> Self {
        self.a_bits = a;
        self.w_bits = w;
        self
    }

    pub fn with_group(mut self, l: usize) -> Self {
        self.smooth_group = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.a_scheme.validate()?;
        self.w_scheme.validate()?;
        if self.method.runtime_smooth() && self.smooth_group == 0 {
            return Err(Error::config("smoothing group size must be >= 1"));
        }
        if self.method == Method::SmoothQuant && !(0.0..=1.0).contains(&self.sq_alpha) {
            return Err(Error::config(format!(
                "SmoothQuant alpha {} outside [0, 1]",
                self.sq_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub y_quant: Matrix,
    pub y_fp: Matrix,
    /// `‖Y_q − Y‖_F / ‖Y‖_F`.
    pub rel_frob_error: f64,
    pub max_abs_error: f64,
    /// Token μ of the quantizer input; `None` when every token is zero.
    pub mu: Option<Summary>,
    /// Activation exactly as handed to the quantizer.
    pub quantizer_input: Matrix,
    pub plan: Option<SmoothingPlan>,
}

fn nonzero_token_mus(x: &Matrix, kind: MuKind) -> Vec<f64> {
    x.row_iter().filter_map(|t| mu(t, kind).ok()).collect()
}

/// Runs a full method pipeline and compares it with the float product.
///
/// RS/RRS order: (rotate X and W) → channel maxima of X → plan → permute both
/// → smooth X → quantize both → fused blocked GEMM.
pub fn run_method(x: &Matrix, w: &Matrix, cfg: &MethodConfig) -> Result<MethodResult> {
    cfg.validate()?;
    check_k("run_method", x.cols(), w.cols())?;
    let y_fp = matmul_fp(x, w)?;

    let (xr, wr) = if cfg.method.rotates() {
        let r = HadamardRotation::new(x.cols())?;
        (r.rotate_rows(x)?, r.rotate_rows(w)?)
    } else {
        (x.clone(), w.clone())
    };

    let (xin, win, plan) = match cfg.method {
        Method::Rs | Method::Rrs => {
            let plan = build_plan(&channel_max_scales(&xr), cfg.smooth_group)?;
            (apply_smooth(&xr, &plan)?, apply_perm_to_weight(&wr, &plan)?, Some(plan))
        }
        Method::SmoothQuant => {
            let sq = match &cfg.sq_calibration {
                Some(c) => c.clone(),
                None => SmoothQuantConfig::calibrate(cfg.sq_alpha, &xr, &wr),
            };
            let s = smoothquant_scales(&sq)?;
            let (xs, ws) = smoothquant_apply(&xr, &wr, &s)?;
            (xs, ws, None)
        }
        Method::Rtn | Method::Rotate => (xr, wr, None),
    };

    let quantized = |m: &Matrix, p: Precision, scheme: GroupScheme| -> Result<Option<QuantizedMatrix>> {
        match p {
            Precision::Int(bits) => Ok(Some(quantize(m, bits, scheme)?)),
            Precision::Bypass => Ok(None),
        }
    };
    let xq = quantized(&xin, cfg.a_bits, cfg.a_scheme)?;
    let wq = quantized(&win, cfg.w_bits, cfg.w_scheme)?;
    let integer_path = |q: &Option<QuantizedMatrix>| {
        q.as_ref().is_some_and(|q| {
            q.scheme() == GroupScheme::PerTensor || q.row_scales().is_some()
        })
    };

    let y_quant = if integer_path(&xq) && integer_path(&wq) {
        let (xq, wq) = (xq.as_ref().unwrap(), wq.as_ref().unwrap());
        match &plan {
            Some(p) => matmul_fused_blocked(
                xq,
                wq,
                p,
                BlockedGemmConfig {
                    block_size: p.group_size(),
                },
            )?,
            None => matmul_quant_naive(xq, wq, None)?,
        }
    } else {
        // bypassed or sub-channel operands go through their dequantized values
        let xd = xq.as_ref().map_or_else(|| xin.clone(), dequantize);
        let wd = wq.as_ref().map_or_else(|| win.clone(), dequantize);
        match &plan {
            Some(p) => matmul_blocked_float(&xd, &wd, p)?,
            None => matmul_fp(&xd, &wd)?,
        }
    };

    Ok(MethodResult {
        rel_frob_error: y_quant.relative_frobenius_error(&y_fp)?,
        max_abs_error: y_quant.max_abs_diff(&y_fp)?,
        mu: Summary::of(&nonzero_token_mus(&xin, cfg.mu_kind)),
        y_quant,
        y_fp,
        quantizer_input: xin,
        plan,
    })
}

/// One fused-vs-naive comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GemmCheckCase {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub block_size: usize,
    pub bits: u32,
    /// Relative Frobenius difference between the fused and naive outputs.
    pub rel_diff: f64,
}

/// Compares [`matmul_fused_blocked`] with group-scaled [`matmul_quant_naive`]
/// on `cases` seeded random problems. The first three cases are a single
/// block spanning K, a ragged tail and `L = 1`; the rest are random.
pub fn gemm_check_suite(cases: usize, seed: u64) -> Result<Vec<GemmCheckCase>> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    (0..cases)
        .map(|i| {
            let mut rng = crate::synthetic::stream_rng(seed, i as u64);
            let n = rng.random_range(1..=48);
            let m = rng.random_range(1..=48);
            let k = rng.random_range(3..=256);
            let block_size = match i {
                0 => k,
                // terminates: b = k - 1 never divides k >= 3
                1 => loop {
                    let b = rng.random_range(2..k);
                    if k % b != 0 {
                        break b;
                    }
                },
                2 => 1,
                _ => rng.random_range(1..=k),
            };
            let bits = if rng.random::<bool>() { 4 } else { 8 };
            let mut normal = |rows, role| {
                Matrix::from_fn(rows, k, role, |_, _| {
                    let g: f64 = rng.sample(StandardNormal);
                    g * (rng.random::<f64>() * 4.0).exp()
                })
            };
            let x = normal(n, Role::Activation)?;
            let w = normal(m, Role::Weight)?;
            let plan = build_plan(&channel_max_scales(&x), block_size)?;
            let xq = quantize(&apply_smooth(&x, &plan)?, bits, GroupScheme::PerChannel)?;
            let wq = quantize(&apply_perm_to_weight(&w, &plan)?, bits, GroupScheme::PerChannel)?;
            let naive = matmul_quant_naive(&xq, &wq, Some(&plan.effective_scales()))?;
            let fused = matmul_fused_blocked(&xq, &wq, &plan, BlockedGemmConfig { block_size })?;
            Ok(GemmCheckCase {
                n,
                m,
                k,
                block_size,
                bits,
                rel_diff: fused.relative_frobenius_error(&naive)?,
            })
        })
        .collect()
}
