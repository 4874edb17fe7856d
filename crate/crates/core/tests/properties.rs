use hecpd::argmax::{argmax_baseline, argmax_fast, rank, OneHotReading};
use hecpd::backend::{ContextParams, EvalContext};
use hecpd::compare::{cmp_scalar, resolution, SignParams};
use hecpd::cusum::{cusum, scores};
use hecpd::datagen::{gen_series, GenSpec, Noise, Scenario};
use hecpd::dp::{epsilon_for_sigma, sigma_dp};
use hecpd::matrix::{col_to_row, repl_cols, repl_rows, row_to_col, sum_cols, sum_rows, BlockMatrix};
use hecpd::oracle::{self, cpd_plain, cusum_trace, normalized_scores, pattern_histogram};
use hecpd::pipeline::{cpd, CpdConfig, TimeSeries};
use hecpd::summarize::{summarize, BlockLayout, ChangeType};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn gamma() -> f64 {
    resolution(SignParams::default(), 0.01, 1e-4)
}

fn context(dim: usize) -> EvalContext {
    EvalContext::new(ContextParams::new(dim * dim)).unwrap()
}

fn matrix(ctx: &EvalContext, dim: usize, values: &[f64]) -> BlockMatrix {
    let rows: Vec<&[f64]> = values.chunks(dim).collect();
    BlockMatrix::encrypt_rows(ctx, dim, &rows).unwrap()
}

fn square() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1u32..=4).prop_flat_map(|log| {
        let dim = 1usize << log;
        (Just(dim), prop::collection::vec(-1.0f64..1.0, dim * dim))
    })
}

/// Values in `[0, 1]` whose largest entry leads the rest by at least `gap`.
fn separated_max(max_len: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_len).prop_flat_map(move |n| {
        (prop::collection::vec(0.0f64..1.0 - gap, n), 0..n, 0.0f64..1.0).prop_map(move |(mut v, at, lift)| {
            let rest = v.iter().enumerate().filter(|(i, _)| *i != at).map(|(_, x)| *x).fold(0.0, f64::max);
            v[at] = (rest + gap + lift * (1.0 - gap - rest)).min(1.0);
            v
        })
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn plain_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn column_and_row_sums_match_plaintext((dim, values) in square()) {
        let ctx = context(dim);
        let x = matrix(&ctx, dim, &values);
        let cols = sum_rows(&ctx, &x).unwrap();
        let rows = sum_cols(&ctx, &x).unwrap();
        for j in 0..dim {
            let want: f64 = (0..dim).map(|i| values[i * dim + j]).sum();
            prop_assert!((cols.get(0, j) - want).abs() < TOL);
            let want: f64 = values[j * dim..(j + 1) * dim].iter().sum();
            prop_assert!((rows.get(j, 0) - want).abs() < TOL);
            for i in 1..dim {
                prop_assert_eq!(cols.get(i, j), 0.0);
                prop_assert_eq!(rows.get(j, i), 0.0);
            }
        }
    }

    #[test]
    fn replication_copies_first_row_and_column((dim, values) in square()) {
        let ctx = context(dim);
        let first_row: Vec<f64> = values.iter().enumerate().map(|(k, v)| if k < dim { *v } else { 0.0 }).collect();
        let first_col: Vec<f64> = values.iter().enumerate().map(|(k, v)| if k % dim == 0 { *v } else { 0.0 }).collect();
        let by_row = repl_rows(&ctx, &matrix(&ctx, dim, &first_row)).unwrap();
        let by_col = repl_cols(&ctx, &matrix(&ctx, dim, &first_col)).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                prop_assert!((by_row.get(i, j) - values[j]).abs() < TOL);
                prop_assert!((by_col.get(i, j) - values[i * dim]).abs() < TOL);
            }
        }
    }

    #[test]
    fn transposes_invert_each_other((dim, values) in square()) {
        let ctx = context(dim);
        let x = BlockMatrix::encrypt_rows(&ctx, dim, &[&values[..dim]]).unwrap();
        let col = row_to_col(&ctx, &x).unwrap();
        for (i, v) in values[..dim].iter().enumerate() {
            prop_assert!((col.get(i, 0) - v).abs() < TOL);
            for j in 1..dim {
                prop_assert_eq!(col.get(i, j), 0.0);
            }
        }
        let back = col_to_row(&ctx, &col).unwrap();
        prop_assert!(close(back.row(0), &values[..dim], TOL));
    }

    #[test]
    fn rotation_is_cyclic_and_invertible(
        values in (0u32..7).prop_flat_map(|log| prop::collection::vec(-1.0f64..1.0, 1usize << log)),
        k in -200isize..200,
    ) {
        let ctx = EvalContext::new(ContextParams::new(values.len())).unwrap();
        let x = ctx.encrypt(&values).unwrap();
        let y = ctx.rotate(&x, k).unwrap();
        let n = values.len() as isize;
        for (i, v) in y.decode().iter().enumerate() {
            prop_assert_eq!(*v, values[(i as isize + k).rem_euclid(n) as usize]);
        }
        let back = ctx.rotate(&y, -k).unwrap();
        prop_assert_eq!(back.decode(), &values[..]);
        prop_assert_eq!(y.depth(), x.depth());
    }

    #[test]
    fn fast_argmax_finds_separated_maximum(values in separated_max(16, 2.0 * gamma())) {
        let n = values.len();
        let dim = n.next_power_of_two();
        let ctx = context(dim);
        let x = BlockMatrix::encrypt_rows(&ctx, dim, &[&values]).unwrap();
        let out = argmax_fast(&ctx, &x, n, SignParams::default()).unwrap();
        let reading = OneHotReading::read(out.data().decode(), n).unwrap();
        prop_assert_eq!(reading.index, plain_argmax(&values));
        prop_assert!(reading.is_dominant());
    }

    #[test]
    fn baseline_argmax_agrees_with_fast(values in separated_max(8, 2.0 * gamma())) {
        let n = values.len();
        let dim = n.next_power_of_two();
        let ctx = context(dim);
        let x = BlockMatrix::encrypt_rows(&ctx, dim, &[&values]).unwrap();
        let fast = argmax_fast(&ctx, &x, n, SignParams::default()).unwrap();
        let base = argmax_baseline(&ctx, &x, n, SignParams::default()).unwrap();
        let a = OneHotReading::read(fast.data().decode(), n).unwrap();
        let b = OneHotReading::read(base.data().decode(), n).unwrap();
        prop_assert_eq!(a.index, b.index);
    }

    #[test]
    fn ranks_match_sorting(seed in prop::collection::vec(0usize..1000, 1..12)) {
        let mut distinct = seed.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let g = 2.0 * gamma();
        let values: Vec<f64> = distinct.iter().map(|v| *v as f64 / 1000.0).collect();
        prop_assume!(values.windows(2).all(|w| w[1] - w[0] >= g));
        let shuffled: Vec<f64> = values.iter().rev().copied().collect();
        let n = shuffled.len();
        let dim = n.next_power_of_two();
        let ctx = context(dim);
        let x = BlockMatrix::encrypt_rows(&ctx, dim, &[&shuffled]).unwrap();
        let r = rank(&ctx, &x, n, SignParams::default()).unwrap();
        for (i, got) in r.row(0)[..n].iter().enumerate() {
            let want = (n - i) as f64;
            prop_assert!((got - want).abs() < 0.01 * n as f64, "rank {} vs {}", got, want);
        }
    }

    #[test]
    fn cusum_deviation_is_bounded(stats in prop::collection::vec(0.0f64..=1.0, 1..300)) {
        let n = stats.len() as f64;
        for d in cusum_trace(&stats) {
            prop_assert!(d <= n / 4.0 + 1e-9);
        }
    }

    #[test]
    fn squared_and_absolute_cusum_peak_together(stats in prop::collection::vec(0.0f64..=1.0, 2..200)) {
        let trace = cusum_trace(&stats);
        let squared = normalized_scores(&trace);
        prop_assert_eq!(plain_argmax(&trace), plain_argmax(&squared));
        prop_assert!(squared.iter().all(|s| (0.0..=1.0 + 1e-12).contains(s)));
    }

    #[test]
    fn encrypted_scores_match_oracle(stats in prop::collection::vec(0.0f64..=1.0, 1..40)) {
        let n = stats.len();
        let dim = n.next_power_of_two();
        let ctx = context(dim);
        let rows: Vec<[f64; 1]> = stats.iter().map(|s| [*s]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        let s = BlockMatrix::encrypt_rows(&ctx, dim, &refs).unwrap();
        let got = scores(&ctx, &s, n).unwrap();
        let want = normalized_scores(&cusum_trace(&stats));
        prop_assert!(close(&got.row(0)[..n], &want, 1e-9));
    }

    #[test]
    fn location_is_scale_invariant(
        before in 0.0f64..0.1,
        after in 0.2f64..1.0 / 3.0,
        jitter in prop::collection::vec(0.0f64..0.01, 16..48),
        split in 0.25f64..0.75,
    ) {
        let n = jitter.len();
        let at = ((n as f64 * split) as usize).max(1);
        let stats: Vec<f64> = jitter.iter().enumerate().map(|(i, j)| if i < at { before } else { after } + j).collect();
        let reference = plain_argmax(&cusum_trace(&stats));
        let dim = n.next_power_of_two();
        for c in [0.1, 1.0, 3.0] {
            let ctx = context(dim);
            let rows: Vec<[f64; 1]> = stats.iter().map(|s| [c * s]).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
            let s = BlockMatrix::encrypt_rows(&ctx, dim, &refs).unwrap();
            let out = cusum(&ctx, &s, n, SignParams::default()).unwrap();
            let reading = OneHotReading::read(out.data().decode(), n).unwrap();
            prop_assert_eq!(reading.index, reference, "scale {}", c);
        }
    }

    #[test]
    fn comparator_is_accurate_outside_resolution(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let g = gamma();
        prop_assume!((a - b).abs() >= g);
        let exact = if a > b { 1.0 } else { 0.0 };
        prop_assert!((cmp_scalar(a, b, SignParams::default()) - exact).abs() <= 0.01);
    }

    #[test]
    fn pattern_histogram_counts_windows(values in prop::collection::vec(-5.0f64..5.0, 3..80), r in 1usize..5) {
        prop_assume!(values.len() > r);
        let hist = pattern_histogram(&values, r).unwrap();
        let n = values.len() as f64;
        let total: f64 = hist.values().sum();
        prop_assert!((total - (values.len() - r) as f64 / n).abs() < 1e-12);
        for pattern in hist.keys() {
            let mut sorted = pattern.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (1..=r + 1).collect::<Vec<_>>());
        }
    }

    #[test]
    fn summaries_match_oracle(values in prop::collection::vec(0.0f64..=1.0, 9..160), m in 3usize..17) {
        prop_assume!(m <= values.len());
        for t in [ChangeType::Mean, ChangeType::Variance] {
            let layout = BlockLayout::new(values.len(), m, t).unwrap();
            let ctx = EvalContext::new(ContextParams::new(layout.slot_count())).unwrap();
            let x = layout.encode(&ctx, &values).unwrap();
            let got = summarize(&ctx, &x, &layout, t, SignParams::default()).unwrap();
            let want = oracle::block_statistics(&values, &layout, t);
            let col: Vec<f64> = (0..layout.n_blocks).map(|i| got.get(i, 0)).collect();
            prop_assert!(close(&col, &want, 1e-9));
        }
    }

    #[test]
    fn variance_summary_has_unbiased_range(block in prop::collection::vec(0.0f64..=1.0, 2..40)) {
        let m = block.len() as f64;
        let v = oracle::variance(&block);
        prop_assert!(v >= -1e-15);
        prop_assert!(v <= m / (4.0 * (m - 1.0)) + 1e-12);
    }

    #[test]
    fn encrypted_detection_is_deterministic(seed in 0u64..1000, noise in prop::sample::select(vec![0.0, 1e-7])) {
        let spec = GenSpec::new(400, Scenario::MeanShift { before: 0.0, after: 1.0, std: 1.0 }, Noise::Gaussian);
        let ts = gen_series(&spec, seed).unwrap();
        let cfg = CpdConfig { noise_stddev: noise, seed, ..CpdConfig::new(ChangeType::Mean) };
        let a = cpd(&ts, &cfg).unwrap();
        let b = cpd(&ts, &cfg).unwrap();
        prop_assert_eq!(a, b);
        let again = gen_series(&spec, seed).unwrap();
        prop_assert_eq!(again.values(), ts.values());
    }

    #[test]
    fn privacy_calibration_round_trips(eps in 0.05f64..100.0, n in 100usize..100_000, clip in 0.1f64..10.0) {
        let delta = 1.0 / (n as f64 * n as f64);
        let sigma = sigma_dp(eps, delta, clip).unwrap();
        prop_assert!((epsilon_for_sigma(sigma, delta, clip) - eps).abs() <= 1e-9 * eps.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encrypted_matches_oracle_on_resolvable_series(
        seed in 0u64..10_000,
        t in prop::sample::select(ChangeType::ALL.to_vec()),
        n in 200usize..1500,
    ) {
        let scenario = match t {
            ChangeType::Mean => Scenario::MeanShift { before: 0.0, after: 1.0, std: 1.0 },
            ChangeType::Variance => Scenario::VarianceShift { mean: 0.0, std_before: 1.0, std_after: 2.0 },
            ChangeType::Frequency => Scenario::Ar1Shift { phi_before: 0.3, phi_after: 0.7, innovation_std: 1.0 },
        };
        let ts: TimeSeries = gen_series(&GenSpec::new(n, scenario, Noise::Gaussian), seed).unwrap();
        let cfg = CpdConfig::new(t);
        let enc = cpd(&ts, &cfg).unwrap();
        let normalized = hecpd::pipeline::normalize(&ts);
        let plain = cpd_plain(normalized.series.values(), cfg.block_size_for(n), t).unwrap();
        prop_assume!(plain.score_gap >= gamma());
        prop_assert_eq!(enc.tau_block, plain.tau_block);
        prop_assert!(enc.confidence_ok);
    }
}
