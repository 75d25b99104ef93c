//! Property tests for the invariants of every module.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rrs_core::analysis::{mu, spike_census, token_mus, MuKind, SpikeMagnitude, VictimSimConfig, victim_samples};
use rrs_core::gemm::{matmul_fp, matmul_fused_blocked, matmul_quant_naive, run_method, BlockedGemmConfig, Method, MethodConfig};
use rrs_core::quant::{dequantize, qmax, quantize, GroupScheme, Precision};
use rrs_core::rotation::{hadamard, rotate_dense};
use rrs_core::smooth::{apply_perm_to_weight, apply_smooth, build_plan, channel_max_scales, smoothquant_apply, smoothquant_scales, unpermute_columns, SmoothQuantConfig};
use rrs_core::synthetic::{generate, BaseDistribution, OutlierKind, SyntheticSpec};
use rrs_core::tensor_file::{parse_tensor, write_tensor, ElementType};
use rrs_core::{Matrix, Role};

fn gaussian(rows: usize, cols: usize, seed: u64, spread: f64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, Role::Activation, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        // heavy-ish tails so scales vary between rows and columns
        g * (rng.random::<f64>() * spread).exp()
    })
    .unwrap()
}

fn ulp(x: f64) -> f64 {
    let x = x.abs();
    f64::from_bits(x.to_bits() + 1) - x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_file_round_trip_is_bit_exact(rows in 0usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let m = gaussian(rows, cols, seed, 8.0);
        let mut buf = Vec::new();
        write_tensor(&m, ElementType::F64, &mut buf).unwrap();
        let back = parse_tensor(&buf, Role::Activation).unwrap();
        prop_assert!(m.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.shape(), m.shape());
    }

    #[test]
    fn generation_is_pure(seed in any::<u64>(), offset in 0.0f64..3.0) {
        let spec = SyntheticSpec {
            kind: OutlierKind::Mixed,
            channels: vec![1, 3],
            spikes: vec![(0, 0), (4, 2)],
            magnitude: 9.0,
            ..SyntheticSpec::plain(5, 4, BaseDistribution::Gaussian { sigma: 1.0, channel_offset: offset }, seed)
        };
        prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn constant_base_channel_outliers_dominate(
        value in 0.1f64..10.0,
        magnitude in 1.0f64..100.0,
        channels in proptest::collection::btree_set(0usize..8, 1..4),
    ) {
        let channels: Vec<usize> = channels.into_iter().collect();
        let spec = SyntheticSpec {
            kind: OutlierKind::ChannelWise,
            channels: channels.clone(),
            magnitude,
            ..SyntheticSpec::plain(6, 8, BaseDistribution::Constant { value }, 0)
        };
        let m = generate(&spec).unwrap();
        let normal_median = (0..8)
            .filter(|c| !channels.contains(c))
            .map(|c| {
                let mut col: Vec<f64> = m.column(c).map(f64::abs).collect();
                col.sort_by(f64::total_cmp);
                col[col.len() / 2]
            })
            .fold(0.0, f64::max);
        for &c in &channels {
            let min = m.column(c).map(f64::abs).fold(f64::INFINITY, f64::min);
            prop_assert!(min >= magnitude * normal_median);
        }
    }

    #[test]
    fn quant_round_trip_bound(rows in 1usize..8, cols in 1usize..40, bits in 2u32..=8, group in 1usize..16, seed in any::<u64>()) {
        let m = gaussian(rows, cols, seed, 4.0);
        for scheme in [GroupScheme::PerTensor, GroupScheme::PerChannel, GroupScheme::SubChannel { group_size: group }] {
            let q = quantize(&m, bits, scheme).unwrap();
            let d = dequantize(&q);
            let lim = qmax(bits) as i32;
            prop_assert!(q.scales().iter().all(|&s| s > 0.0));
            prop_assert!(q.ints().iter().all(|&v| (v as i32).abs() <= lim));
            for r in 0..rows {
                for c in 0..cols {
                    let x = m.get(r, c);
                    let err = (x - d.get(r, c)).abs();
                    prop_assert!(err <= q.scale_at(r, c) / 2.0 + 4.0 * ulp(x), "{err} vs {}", q.scale_at(r, c));
                }
            }
        }
    }

    #[test]
    fn quant_scale_equivariance(rows in 1usize..6, cols in 1usize..20, exp in -8i32..8, seed in any::<u64>()) {
        let m = gaussian(rows, cols, seed, 2.0);
        let c = 2f64.powi(exp);
        let scaled = m.scaled(c).unwrap();
        for scheme in [GroupScheme::PerTensor, GroupScheme::PerChannel, GroupScheme::SubChannel { group_size: 3 }] {
            let a = quantize(&m, 4, scheme).unwrap();
            let b = quantize(&scaled, 4, scheme).unwrap();
            prop_assert_eq!(a.ints(), b.ints());
            for (sa, sb) in a.scales().iter().zip(b.scales()) {
                prop_assert_eq!(sa * c, *sb);
            }
        }
    }

    #[test]
    fn per_channel_equals_full_row_sub_channel(rows in 1usize..6, cols in 1usize..20, bits in 2u32..=8, seed in any::<u64>()) {
        let m = gaussian(rows, cols, seed, 3.0);
        let a = quantize(&m, bits, GroupScheme::PerChannel).unwrap();
        let b = quantize(&m, bits, GroupScheme::SubChannel { group_size: cols }).unwrap();
        prop_assert_eq!(a.ints(), b.ints());
        prop_assert_eq!(a.scales(), b.scales());
        prop_assert_eq!(dequantize(&a), dequantize(&b));
    }

    #[test]
    fn rotation_preserves_norms_and_products(log_k in 0u32..8, n in 1usize..6, m in 1usize..6, seed in any::<u64>()) {
        let k = 1usize << log_k;
        let r = hadamard(k).unwrap();
        let x = gaussian(n, k, seed, 1.0);
        let w = gaussian(m, k, seed ^ 1, 1.0).with_role(Role::Weight);
        let xr = r.rotate_rows(&x).unwrap();
        let wr = r.rotate_rows(&w).unwrap();
        for (t, tr) in x.row_iter().zip(xr.row_iter()) {
            let a = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            let b = tr.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(f64::MIN_POSITIVE));
        }
        let y = matmul_fp(&x, &w).unwrap();
        let yr = matmul_fp(&xr, &wr).unwrap();
        prop_assert!(yr.relative_frobenius_error(&y).unwrap() <= 1e-10);
        prop_assert!(xr.max_abs_diff(&rotate_dense(&x, &r).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn equal_rows_stay_equal_after_rotation(log_k in 0u32..9, seed in any::<u64>()) {
        let k = 1usize << log_k;
        let t = gaussian(1, k, seed, 1.0);
        let x = Matrix::from_fn(4, k, Role::Activation, |_, c| t.get(0, c)).unwrap();
        let xr = hadamard(k).unwrap().rotate_rows(&x).unwrap();
        for r in 1..4 {
            prop_assert_eq!(xr.row(r), xr.row(0));
        }
    }

    #[test]
    fn plan_invariants(s in proptest::collection::vec(prop_oneof![Just(1.0), 0.01f64..100.0], 1..50), l in 1usize..12) {
        let plan = build_plan(&s, l).unwrap();
        let mut seen = vec![false; s.len()];
        for &c in plan.permutation() {
            prop_assert!(!seen[c]);
            seen[c] = true;
        }
        let sorted = plan.permuted_raw_scales();
        prop_assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
        for (g, chunk) in sorted.chunks(l).enumerate() {
            prop_assert_eq!(plan.group_scales()[g], chunk.iter().cloned().fold(0.0, f64::max));
        }
        prop_assert_eq!(plan.group_scales().len(), s.len().div_ceil(l));
    }

    #[test]
    fn smoothing_preserves_the_product(n in 1usize..8, m in 1usize..8, k in 1usize..40, l in 1usize..12, seed in any::<u64>()) {
        let x = gaussian(n, k, seed, 4.0);
        let w = gaussian(m, k, seed ^ 7, 1.0).with_role(Role::Weight);
        let plan = build_plan(&channel_max_scales(&x), l).unwrap();
        let xs = apply_smooth(&x, &plan).unwrap();
        let wp = apply_perm_to_weight(&w, &plan).unwrap();
        let y = matmul_fp(&x, &w).unwrap();
        // rescale the smoothed activation, then multiply with the permuted weight
        let eff = plan.effective_scales();
        let xr = Matrix::from_fn(n, k, Role::Activation, |r, c| xs.get(r, c) * eff[c]).unwrap();
        prop_assert!(matmul_fp(&xr, &wp).unwrap().relative_frobenius_error(&y).unwrap() <= 1e-10);
        // permutation alone
        let xp = x.select_columns(plan.permutation()).unwrap();
        prop_assert!(matmul_fp(&xp, &wp).unwrap().relative_frobenius_error(&y).unwrap() <= 1e-12);
        prop_assert_eq!(unpermute_columns(&wp, &plan).unwrap(), w);
    }

    #[test]
    fn unit_group_smoothing_bounds_columns(n in 1usize..10, k in 1usize..30, seed in any::<u64>()) {
        let x = gaussian(n, k, seed, 4.0);
        let plan = build_plan(&channel_max_scales(&x), 1).unwrap();
        let xs = apply_smooth(&x, &plan).unwrap();
        for m in xs.column_abs_max() {
            prop_assert_eq!(m, 1.0);
        }
    }

    #[test]
    fn smoothquant_preserves_the_product(alpha in 0.0f64..=1.0, seed in any::<u64>()) {
        let x = gaussian(4, 8, seed, 3.0);
        let w = gaussian(6, 8, seed ^ 3, 1.0).with_role(Role::Weight);
        let s = smoothquant_scales(&SmoothQuantConfig::calibrate(alpha, &x, &w)).unwrap();
        let (xs, ws) = smoothquant_apply(&x, &w, &s).unwrap();
        let y = matmul_fp(&x, &w).unwrap();
        prop_assert!(matmul_fp(&xs, &ws).unwrap().relative_frobenius_error(&y).unwrap() <= 1e-12);
    }

    #[test]
    fn fused_matches_naive(n in 1usize..8, m in 1usize..8, k in 1usize..70, l in 1usize..70, bits in 2u32..=8, seed in any::<u64>()) {
        let l = l.min(k);
        let x = gaussian(n, k, seed, 4.0);
        let w = gaussian(m, k, seed ^ 11, 1.0).with_role(Role::Weight);
        let plan = build_plan(&channel_max_scales(&x), l).unwrap();
        let xq = quantize(&apply_smooth(&x, &plan).unwrap(), bits, GroupScheme::PerChannel).unwrap();
        let wq = quantize(&apply_perm_to_weight(&w, &plan).unwrap(), bits, GroupScheme::PerChannel).unwrap();
        let naive = matmul_quant_naive(&xq, &wq, Some(&plan.effective_scales())).unwrap();
        let fused = matmul_fused_blocked(&xq, &wq, &plan, BlockedGemmConfig { block_size: l }).unwrap();
        prop_assert!(fused.relative_frobenius_error(&naive).unwrap() <= 1e-9);
    }

    #[test]
    fn bypass_preserves_output_for_every_method(n in 1usize..6, m in 1usize..6, log_k in 0u32..7, l in 1usize..9, seed in any::<u64>()) {
        let k = 1usize << log_k;
        let x = gaussian(n, k, seed, 3.0);
        let w = gaussian(m, k, seed ^ 5, 1.0).with_role(Role::Weight);
        for method in Method::ALL {
            let cfg = MethodConfig::new(method).with_bits(Precision::Bypass, Precision::Bypass).with_group(l);
            prop_assert!(run_method(&x, &w, &cfg).unwrap().rel_frob_error <= 1e-10);
        }
    }

    #[test]
    fn mu_bounds_and_scale_invariance(t in proptest::collection::vec(-1e3f64..1e3, 1..64), c in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6]) {
        prop_assume!(t.iter().any(|&v| v != 0.0));
        let k = t.len() as f64;
        let rms = mu(&t, MuKind::Rms).unwrap();
        let l2 = mu(&t, MuKind::L2).unwrap();
        prop_assert!((1.0 - 1e-12..=k.sqrt() * (1.0 + 1e-12)).contains(&rms));
        prop_assert!((1.0 / k.sqrt() * (1.0 - 1e-12)..=1.0 + 1e-12).contains(&l2));
        let ct: Vec<f64> = t.iter().map(|v| v * c).collect();
        prop_assert!((mu(&ct, MuKind::Rms).unwrap() - rms).abs() <= 1e-12 * rms);
        prop_assert!((mu(&ct, MuKind::L2).unwrap() - l2).abs() <= 1e-12 * l2);
    }

    #[test]
    fn census_ignores_token_order(seed in any::<u64>(), shift in 1usize..9) {
        let x = gaussian(9, 16, seed, 3.0);
        let order: Vec<usize> = (0..9).map(|i| (i + shift) % 9).collect();
        let shuffled = Matrix::from_fn(9, 16, Role::Activation, |r, c| x.get(order[r], c)).unwrap();
        let bins = [2.0, 5.0, 20.0];
        prop_assert_eq!(spike_census(&x, &bins).unwrap(), spike_census(&shuffled, &bins).unwrap());
    }

    #[test]
    fn zero_magnitude_victims_are_harmless(log_k in 1u32..8, l in 1usize..6, seed in any::<u64>()) {
        let k = 1usize << log_k;
        let cfg = VictimSimConfig {
            spikes_per_token: (1, 1),
            magnitude: SpikeMagnitude::Fixed { value: 0.0 },
            ..VictimSimConfig::new(k, l, 4, seed)
        };
        prop_assert!(victim_samples(&cfg).unwrap().iter().all(|&u| u == 1.0));
    }
}

#[test]
fn orthogonality_up_to_1024() {
    for log_k in 0..=10 {
        let k = 1usize << log_k;
        let r = hadamard(k).unwrap();
        // row i of R·Rᵀ is (e_i·R)·Rᵀ = (e_i·R)·R since R is symmetric
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            let row = r.rotate_vector(&r.rotate_vector(&e).unwrap()).unwrap();
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() <= 1e-12, "K={k} ({i},{j}) = {v}");
            }
        }
        if k <= 64 {
            let d = r.to_matrix();
            assert!(d.data().iter().all(|&v| v.abs() == 1.0 / (k as f64).sqrt()));
        }
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let x = gaussian(64, 128, 3, 3.0);
    let w = gaussian(48, 128, 4, 1.0).with_role(Role::Weight);
    let cfg = MethodConfig::new(Method::Rrs).with_group(32);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_method(&x, &w, &cfg).unwrap().y_quant)
    };
    let a = run(1);
    let b = run(4);
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn rs_unit_group_quantizer_input_is_bounded() {
    let x = gaussian(32, 64, 9, 4.0);
    let w = gaussian(16, 64, 10, 1.0).with_role(Role::Weight);
    let r = run_method(&x, &w, &MethodConfig::new(Method::Rs)).unwrap();
    assert!(r.quantizer_input.column_abs_max().iter().all(|&m| m == 1.0));
}

#[test]
fn transpose_identity() {
    let a = gaussian(7, 5, 1, 1.0);
    let b = gaussian(4, 5, 2, 1.0);
    let ab = matmul_fp(&a, &b).unwrap().transpose();
    let ba = matmul_fp(&b, &a).unwrap();
    assert!(ab.max_abs_diff(&ba).unwrap() <= 1e-12 * ba.abs_max());
}

#[test]
fn token_mus_flag_zero_tokens() {
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]], Role::Activation).unwrap();
    assert!(token_mus(&x, MuKind::Rms).is_err());
}
