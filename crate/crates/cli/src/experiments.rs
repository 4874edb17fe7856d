//! Reproducible experiment drivers shared by the `bench` and `compare`
//! commands and the acceptance suite.

use std::time::{Duration, Instant};

use hecpd::argmax::{argmax_baseline, argmax_fast};
use hecpd::backend::{ContextParams, EvalContext, OpCounts};
use hecpd::compare::{cmp, SignParams};
use hecpd::cusum::partial_sums;
use hecpd::datagen::{gen_series, GenSpec, Noise, Scenario};
use hecpd::dp::{dp_cpd, relative_error, DpParams};
use hecpd::matrix::BlockMatrix;
use hecpd::oracle::{cpd_plain, PlainDetection};
use hecpd::pipeline::{cpd, normalize, ChangePointResult, CpdConfig, TimeSeries};
use hecpd::summarize::{turning_rates, BlockLayout};
use hecpd::{ChangeType, Result};
use serde::Serialize;

/// Series length of the synthetic accuracy table.
pub const TABLE_N: usize = 40_000;

/// One synthetic setting with a change in the middle of the series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Setting {
    pub label: &'static str,
    pub change_type: ChangeType,
    pub scenario: Scenario,
    pub noise: Noise,
}

impl Setting {
    pub fn spec(&self, n: usize) -> GenSpec {
        GenSpec::new(n, self.scenario, self.noise)
    }
}

const AR1: Scenario = Scenario::Ar1Shift { phi_before: 0.3, phi_after: 0.7, innovation_std: 1.0 };

/// The seven rows of the synthetic accuracy table. Distribution parameters
/// are (mean, variance); every noise family is scaled to that variance.
pub fn table_settings() -> Vec<Setting> {
    let mean = Scenario::MeanShift { before: 0.0, after: 1.0, std: 1.0 };
    let variance = Scenario::VarianceShift { mean: 0.0, std_before: 1.0, std_after: std::f64::consts::SQRT_2 };
    let laplace = Scenario::Ar1Shift { phi_before: 0.3, phi_after: 0.7, innovation_std: 2.0 };
    vec![
        Setting {
            label: "mean N(0,1) -> N(1,1)",
            change_type: ChangeType::Mean,
            scenario: mean,
            noise: Noise::Gaussian,
        },
        Setting {
            label: "mean U(0,1) -> U(1,1)",
            change_type: ChangeType::Mean,
            scenario: mean,
            noise: Noise::Uniform,
        },
        Setting {
            label: "variance N(0,1) -> N(0,2)",
            change_type: ChangeType::Variance,
            scenario: variance,
            noise: Noise::Gaussian,
        },
        Setting {
            label: "variance U(0,1) -> U(0,2)",
            change_type: ChangeType::Variance,
            scenario: variance,
            noise: Noise::Uniform,
        },
        Setting {
            label: "frequency N(0,1), phi 0.3 -> 0.7",
            change_type: ChangeType::Frequency,
            scenario: AR1,
            noise: Noise::Gaussian,
        },
        Setting {
            label: "frequency Lap(0,4), phi 0.3 -> 0.7",
            change_type: ChangeType::Frequency,
            scenario: laplace,
            noise: Noise::Laplace,
        },
        Setting {
            label: "frequency t5, phi 0.3 -> 0.7",
            change_type: ChangeType::Frequency,
            scenario: AR1,
            noise: Noise::StudentT,
        },
    ]
}

/// Encrypted and plaintext detection on the same series.
#[derive(Debug, Clone)]
pub struct Paired {
    pub encrypted: ChangePointResult,
    pub plain: PlainDetection,
    pub truth: usize,
    pub elapsed: Duration,
}

impl Paired {
    pub fn agree(&self) -> bool {
        self.encrypted.tau_block == self.plain.tau_block
    }

    pub fn plain_hits_truth(&self) -> bool {
        self.plain.tau_index() == Some(self.truth)
    }
}

/// Runs both detectors. The plaintext detector sees the same normalized
/// values and block size as the encrypted one.
pub fn run_paired(ts: &TimeSeries, cfg: &CpdConfig, truth: usize) -> Result<Paired> {
    let start = Instant::now();
    let encrypted = cpd(ts, cfg)?;
    let elapsed = start.elapsed();
    let normalized = normalize(ts);
    let plain = cpd_plain(normalized.series.values(), cfg.block_size_for(ts.len()), cfg.change_type)?;
    Ok(Paired { encrypted, plain, truth, elapsed })
}

/// Generates the series for `setting` and runs both detectors.
pub fn run_setting(setting: &Setting, n: usize, seed: u64) -> Result<Paired> {
    let spec = setting.spec(n);
    let ts = gen_series(&spec, seed)?;
    let cfg = CpdConfig { seed, ..CpdConfig::new(setting.change_type) };
    run_paired(&ts, &cfg, spec.change_at)
}

/// Instances of the encrypted-versus-plaintext sweep: every change type,
/// several lengths, several seeds, cycling through noise families.
pub fn sweep_instances(seeds_per_cell: u64) -> Vec<(Setting, usize, u64)> {
    let lengths = [1_000, 2_000, 5_000, 10_000, 20_000, 40_000];
    let settings = table_settings();
    let mut out = Vec::new();
    for change_type in ChangeType::ALL {
        let family: Vec<&Setting> = settings.iter().filter(|s| s.change_type == change_type).collect();
        for (i, n) in lengths.iter().enumerate() {
            for seed in 0..seeds_per_cell {
                let setting = family[(i + seed as usize) % family.len()];
                out.push((*setting, *n, 1000 * i as u64 + seed));
            }
        }
    }
    out
}

/// Operation counts of the individual circuits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ablation {
    pub comparison: OpCounts,
    pub turning_rates: OpCounts,
    pub partial_sums: OpCounts,
    pub argmax_fast: OpCounts,
    pub argmax_baseline: OpCounts,
    pub argmax_len: usize,
}

impl Ablation {
    /// Ciphertext multiplications in one comparison.
    pub fn nu(&self) -> u64 {
        self.comparison.cipher_mults
    }

    /// Relative saving of the column-product argmax in ciphertext multiplications.
    pub fn argmax_reduction(&self) -> f64 {
        1.0 - self.argmax_fast.cipher_mults as f64 / self.argmax_baseline.cipher_mults as f64
    }
}

fn counted<T>(ctx: &EvalContext, f: impl FnOnce() -> Result<T>) -> Result<OpCounts> {
    let before = ctx.counts();
    f()?;
    Ok(ctx.counts() - before)
}

/// Counts for a series of `n` points cut into blocks of `block_size`, and for
/// an argmax over `argmax_len` values.
pub fn ablation(n: usize, block_size: usize, argmax_len: usize, params: SignParams) -> Result<Ablation> {
    let layout = BlockLayout::new(n, block_size, ChangeType::Frequency)?;
    let ctx = EvalContext::new(ContextParams::new(layout.slot_count()))?;
    let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let x = layout.encode(&ctx, &values)?;
    let y = x.clone();
    let comparison = counted(&ctx, || cmp(&ctx, x.data(), y.data(), params))?;
    let turning_rates = counted(&ctx, || turning_rates(&ctx, &x, &layout, params))?;
    let stats: Vec<[f64; 1]> = (0..layout.n_blocks).map(|i| [(i % 10) as f64 / 10.0]).collect();
    let rows: Vec<&[f64]> = stats.iter().map(|r| &r[..]).collect();
    let column = BlockMatrix::encrypt_rows(&ctx, layout.dim, &rows)?;
    let partial_sums = counted(&ctx, || partial_sums(&ctx, &column, layout.n_blocks))?;

    let dim = argmax_len.next_power_of_two();
    let actx = EvalContext::new(ContextParams::new(dim * dim))?;
    let scores: Vec<f64> = (0..argmax_len).map(|i| ((i * 37) % argmax_len) as f64 / argmax_len as f64).collect();
    let row = BlockMatrix::encrypt_rows(&actx, dim, &[&scores])?;
    let argmax_fast = counted(&actx, || argmax_fast(&actx, &row, argmax_len, params))?;
    let argmax_baseline = counted(&actx, || argmax_baseline(&actx, &row, argmax_len, params))?;
    Ok(Ablation { comparison, turning_rates, partial_sums, argmax_fast, argmax_baseline, argmax_len })
}

/// Maps `f` over `items` on all available cores. Results keep the input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Mean relative error of the private detector for one privacy level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DpPoint {
    pub epsilon: f64,
    pub sigma: f64,
    pub mean_error: f64,
    pub runs: usize,
}

/// Mean relative error of the private detector over `seeds`. A run that
/// reports no change counts as relative error one.
pub fn dp_curve(setting: &Setting, n: usize, epsilons: &[f64], seeds: std::ops::Range<u64>) -> Result<Vec<DpPoint>> {
    let spec = setting.spec(n);
    let block_size = hecpd::pipeline::default_block_size(n);
    let seeds: Vec<u64> = seeds.collect();
    let params: Vec<DpParams> = epsilons.iter().map(|&e| DpParams::for_length(e, n)).collect::<Result<_>>()?;
    let per_seed = par_map(&seeds, |&seed| -> Result<Vec<f64>> {
        let ts = gen_series(&spec, seed)?;
        params
            .iter()
            .map(|p| {
                let found = dp_cpd(ts.values(), block_size, setting.change_type, p, seed ^ 0x5eed)?;
                error_or_one(found.tau_index, spec.change_at)
            })
            .collect()
    });
    let per_seed: Vec<Vec<f64>> = per_seed.into_iter().collect::<Result<_>>()?;
    Ok(params
        .iter()
        .enumerate()
        .map(|(i, p)| DpPoint {
            epsilon: p.epsilon,
            sigma: p.sigma(),
            mean_error: per_seed.iter().map(|errs| errs[i]).sum::<f64>() / seeds.len().max(1) as f64,
            runs: seeds.len(),
        })
        .collect())
}

fn error_or_one(found: Option<usize>, truth: usize) -> Result<f64> {
    found.map_or(Ok(1.0), |t| relative_error(t, truth))
}

/// Mean relative errors of the encrypted and plaintext detectors over `seeds`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactErrors {
    pub encrypted: f64,
    pub plain: f64,
    pub agreement: f64,
    pub runs: usize,
}

pub fn exact_errors(setting: &Setting, n: usize, seeds: std::ops::Range<u64>) -> Result<ExactErrors> {
    let seeds: Vec<u64> = seeds.collect();
    let runs = par_map(&seeds, |&seed| run_setting(setting, n, seed));
    let runs: Vec<Paired> = runs.into_iter().collect::<Result<_>>()?;
    let count = runs.len().max(1) as f64;
    let (mut encrypted, mut plain, mut agree) = (0.0, 0.0, 0usize);
    for p in &runs {
        encrypted += error_or_one(p.encrypted.tau_index, p.truth)?;
        plain += error_or_one(p.plain.tau_index(), p.truth)?;
        agree += usize::from(p.agree());
    }
    let out = ExactErrors {
        encrypted: encrypted / count,
        plain: plain / count,
        agreement: agree as f64 / count,
        runs: runs.len(),
    };
    Ok(out)
}

/// The first table setting for `change_type`.
pub fn setting_for(change_type: ChangeType) -> Setting {
    table_settings().into_iter().find(|s| s.change_type == change_type).expect("every change type has a setting")
}

/// Number of positions where the sequence goes up instead of staying flat
/// or going down.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_every_type() {
        let inst = sweep_instances(6);
        assert_eq!(inst.len(), 108);
        for t in ChangeType::ALL {
            assert!(inst.iter().any(|(s, _, _)| s.change_type == t));
        }
    }

    #[test]
    fn inversion_count() {
        assert_eq!(inversions(&[0.5, 0.4, 0.4, 0.1]), 0);
        assert_eq!(inversions(&[0.5, 0.6, 0.4, 0.45]), 2);
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        assert_eq!(par_map(&items, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(par_map(&[] as &[u64], |x| *x).is_empty());
    }

    #[test]
    fn dp_curve_is_deterministic() {
        let s = setting_for(ChangeType::Mean);
        let a = dp_curve(&s, 1_000, &[1.0, 50.0], 0..4).unwrap();
        let b = dp_curve(&s, 1_000, &[1.0, 50.0], 0..4).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].mean_error, b[0].mean_error);
        assert!(a[1].sigma < a[0].sigma);
    }

    #[test]
    fn small_paired_run_agrees() {
        let p = run_setting(&table_settings()[0], 2_000, 3).unwrap();
        assert!(p.agree());
    }
}
