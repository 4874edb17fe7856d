//! End-to-end encrypted change-point detection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::argmax::{argmax_fast, OneHotReading};
use crate::backend::{ContextParams, EvalContext, OpCounts, DEFAULT_DEPTH_BUDGET};
use crate::compare::{resolution, SignParams};
use crate::cusum::scores;
use crate::error::{invalid, Result};
use crate::oracle::top_two_gap;
use crate::summarize::{summarize, BlockLayout, ChangeType};

/// Shortest accepted series.
pub const MIN_SERIES_LEN: usize = 9;

/// Comparator tolerance used to derive the reported resolution.
pub const RESOLUTION_TOLERANCE: f64 = 0.01;

/// Grid step used to derive the reported resolution.
pub const RESOLUTION_STEP: f64 = 1e-4;

/// A univariate series with the value range assumed known in advance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeSeries {
    values: Vec<f64>,
    bounds: (f64, f64),
    name: String,
    bounds_from_data: bool,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, bounds: (f64, f64), name: impl Into<String>) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("bounds must be finite with lower < upper"));
        }
        Self::checked(values, bounds, name.into(), false)
    }

    /// Uses the observed range as bounds. The bounds then depend on the data,
    /// which a deployment would leak; callers should surface that.
    pub fn with_data_bounds(values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bounds = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self::checked(values, bounds, name.into(), true)
    }

    fn checked(values: Vec<f64>, bounds: (f64, f64), name: String, bounds_from_data: bool) -> Result<Self> {
        if values.len() < MIN_SERIES_LEN {
            return Err(invalid("series needs at least nine points"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(alloc::format!("value {i} is not finite")));
        }
        Ok(TimeSeries { values, bounds, name, bounds_from_data })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds_from_data(&self) -> bool {
        self.bounds_from_data
    }
}

/// A series mapped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub series: TimeSeries,
    /// Values that fell outside the bounds and were clamped.
    pub clamped: usize,
}

/// Maps the bounds affinely onto `[0, 1]`, clamping outliers.
pub fn normalize(ts: &TimeSeries) -> Normalized {
    let (lo, hi) = ts.bounds;
    let mut clamped = 0;
    let values = ts
        .values
        .iter()
        .map(|v| {
            let u = (v - lo) / (hi - lo);
            if !(0.0..=1.0).contains(&u) {
                clamped += 1;
            }
            u.clamp(0.0, 1.0)
        })
        .collect();
    let series =
        TimeSeries { values, bounds: (0.0, 1.0), name: ts.name.clone(), bounds_from_data: ts.bounds_from_data };
    Normalized { series, clamped }
}

/// `floor(sqrt(n))`, replaced by the nearest power of two when that is
/// within 25 percent.
pub fn default_block_size(n: usize) -> usize {
    let mut root = libm::sqrt(n as f64) as usize;
    while root * root > n {
        root -= 1;
    }
    while (root + 1) * (root + 1) <= n {
        root += 1;
    }
    if root == 0 {
        return 1;
    }
    let above = root.next_power_of_two();
    let below = if above == root { root } else { above / 2 };
    let nearest = if above - root < root - below { above } else { below };
    if 4 * nearest.abs_diff(root) <= root {
        nearest
    } else {
        root
    }
}

/// Detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CpdConfig {
    pub change_type: ChangeType,
    /// Points per block; `None` selects [`default_block_size`].
    pub block_size: Option<usize>,
    pub sign_params: SignParams,
    pub depth_budget: usize,
    pub noise_stddev: f64,
    pub seed: u64,
}

impl CpdConfig {
    pub fn new(change_type: ChangeType) -> Self {
        CpdConfig {
            change_type,
            block_size: None,
            sign_params: SignParams::default(),
            depth_budget: DEFAULT_DEPTH_BUDGET,
            noise_stddev: 0.0,
            seed: 0,
        }
    }

    pub fn block_size_for(&self, n: usize) -> usize {
        self.block_size.unwrap_or_else(|| default_block_size(n))
    }
}

/// Evaluation details of an encrypted run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub counts: OpCounts,
    pub max_depth: usize,
    pub depth_budget: usize,
    /// Comparator resolution for the configured parameters.
    pub gamma: f64,
    /// Top-two gap of the scaled squared CUSUM scores, read from the emulator.
    pub score_gap: f64,
    pub gap_margin: f64,
    pub reading: OneHotReading,
    pub clamped: usize,
    pub bounds_from_data: bool,
}

/// Located change point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChangePointResult {
    /// One-based block of the change; `None` when confidence failed.
    pub tau_block: Option<usize>,
    /// `tau_block * block_size`, the change in original time steps.
    pub tau_index: Option<usize>,
    pub confidence_ok: bool,
    pub change_type: ChangeType,
    pub layout: BlockLayout,
    pub diagnostics: Option<Diagnostics>,
}

impl ChangePointResult {
    pub(crate) fn plain(tau_block: Option<usize>, change_type: ChangeType, layout: BlockLayout) -> Self {
        ChangePointResult {
            tau_block,
            tau_index: tau_block.map(|b| b * layout.block_size),
            confidence_ok: tau_block.is_some(),
            change_type,
            layout,
            diagnostics: None,
        }
    }
}

/// Runs normalization, block encoding, the block summary, CUSUM scoring and
/// the encrypted argmax, then decodes the location on the client side.
///
/// The decoded column products are compared directly: the change block is the
/// largest one, accepted when it strictly dominates every other block. Flat
/// statistics give ties and are reported as a confidence failure.
pub fn cpd(ts: &TimeSeries, cfg: &CpdConfig) -> Result<ChangePointResult> {
    let block_size = cfg.block_size_for(ts.len());
    let layout = BlockLayout::new(ts.len(), block_size, cfg.change_type)?;
    let normalized = normalize(ts);
    let ctx = EvalContext::new(ContextParams {
        slot_count: layout.slot_count(),
        depth_budget: cfg.depth_budget,
        noise_stddev: cfg.noise_stddev,
        rng_seed: cfg.seed,
    })?;
    let x = layout.encode(&ctx, normalized.series.values())?;
    let stats = summarize(&ctx, &x, &layout, cfg.change_type, cfg.sign_params)?;
    let n_blocks = layout.n_blocks;
    let u = scores(&ctx, &stats, n_blocks)?;
    let located = argmax_fast(&ctx, &u, n_blocks, cfg.sign_params)?;
    let reading = OneHotReading::read(located.row(0), n_blocks)?;
    let confidence_ok = reading.is_dominant();
    let tau_block = confidence_ok.then_some(reading.index + 1);
    let gamma = resolution(cfg.sign_params, RESOLUTION_TOLERANCE, RESOLUTION_STEP);
    let score_gap = top_two_gap(&u.row(0)[..n_blocks]);
    let diagnostics = Diagnostics {
        counts: ctx.counts(),
        max_depth: ctx.max_depth(),
        depth_budget: cfg.depth_budget,
        gamma,
        score_gap,
        gap_margin: score_gap - gamma,
        reading,
        clamped: normalized.clamped,
        bounds_from_data: ts.bounds_from_data(),
    };
    Ok(ChangePointResult {
        tau_block,
        tau_index: tau_block.map(|b| b * block_size),
        confidence_ok,
        change_type: cfg.change_type,
        layout,
        diagnostics: Some(diagnostics),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use alloc::vec;

    #[test]
    fn normalization_examples() {
        let mut values = vec![0.0; 9];
        values[..3].copy_from_slice(&[-200.0, 0.0, 200.0]);
        let ts = TimeSeries::new(values, (-200.0, 200.0), "x").unwrap();
        let out = normalize(&ts);
        assert_eq!(&out.series.values()[..3], &[0.0, 0.5, 1.0]);
        assert_eq!(out.clamped, 0);
        let ts = TimeSeries::new(vec![3.0; 9], (2.0, 4.0), "c").unwrap();
        assert!(normalize(&ts).series.values().iter().all(|v| *v == 0.5));
        let ts = TimeSeries::new(vec![5.0; 9], (2.0, 4.0), "hi").unwrap();
        let out = normalize(&ts);
        assert_eq!(out.clamped, 9);
        assert!(out.series.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn rejects_invalid_series() {
        assert!(TimeSeries::new(vec![0.0; 9], (1.0, 1.0), "x").is_err());
        assert!(TimeSeries::new(vec![0.0; 8], (0.0, 1.0), "x").is_err());
        assert!(TimeSeries::new(vec![f64::NAN; 9], (0.0, 1.0), "x").is_err());
        let ts = TimeSeries::with_data_bounds(vec![2.0; 9], "c").unwrap();
        assert_eq!(ts.bounds(), (1.5, 2.5));
        assert!(ts.bounds_from_data());
    }

    #[test]
    fn block_size_defaults() {
        assert_eq!(default_block_size(40_000), 200);
        assert_eq!(default_block_size(10_000), 100);
        assert_eq!(default_block_size(1_000), 32);
        assert_eq!(default_block_size(1 << 20), 1024);
        assert_eq!(default_block_size(9), 3);
        assert_eq!(default_block_size(25), 4);
    }

    #[test]
    fn step_series_in_mean_mode() {
        let values: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
        let ts = TimeSeries::new(values, (0.0, 1.0), "step").unwrap();
        let cfg = CpdConfig { block_size: Some(10), ..CpdConfig::new(ChangeType::Mean) };
        let r = cpd(&ts, &cfg).unwrap();
        assert_eq!(r.tau_block, Some(5));
        assert_eq!(r.tau_index, Some(50));
        assert!(r.confidence_ok);
        assert!(r.diagnostics.unwrap().reading.is_clean());
    }

    #[test]
    fn constant_series_fails_confidence() {
        let ts = TimeSeries::new(vec![0.3; 100], (0.0, 1.0), "flat").unwrap();
        for t in ChangeType::ALL {
            let cfg = CpdConfig { block_size: Some(10), ..CpdConfig::new(t) };
            let r = cpd(&ts, &cfg).unwrap();
            assert!(!r.confidence_ok, "{t:?}");
            assert_eq!(r.tau_index, None);
        }
    }

    #[test]
    fn tight_budget_overflows() {
        let values: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let ts = TimeSeries::new(values, (0.0, 7.0), "x").unwrap();
        let cfg = CpdConfig { block_size: Some(10), depth_budget: 30, ..CpdConfig::new(ChangeType::Frequency) };
        assert!(matches!(cpd(&ts, &cfg), Err(Error::DepthOverflow { .. })));
    }
}
