//! Exact plaintext reference for the encrypted detector.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::summarize::{BlockLayout, ChangeType};

/// The order-2 patterns that are neither increasing nor decreasing.
pub const TURNING_PATTERNS: [[usize; 3]; 4] = [[1, 3, 2], [3, 1, 2], [2, 3, 1], [2, 1, 3]];

/// Rank tuple of `window`: entry `j` is the rank of `window[j]`, 1 for the
/// smallest. Equal values are ranked by first occurrence.
pub fn ordinal_pattern(window: &[f64]) -> Vec<usize> {
    window
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let below = window.iter().filter(|y| *y < x).count();
            let earlier_ties = window[..j].iter().filter(|y| *y == x).count();
            1 + below + earlier_ties
        })
        .collect()
}

/// Empirical frequency of every order-`r` pattern, each count divided by the
/// series length.
pub fn pattern_histogram(values: &[f64], r: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    if values.len() <= r {
        return Err(invalid("series must be longer than the pattern order"));
    }
    let n = values.len() as f64;
    let mut table = BTreeMap::new();
    for window in values.windows(r + 1) {
        *table.entry(ordinal_pattern(window)).or_insert(0.0) += 1.0 / n;
    }
    Ok(table)
}

pub fn is_turning(triplet: &[f64]) -> bool {
    let pattern = ordinal_pattern(triplet);
    TURNING_PATTERNS.iter().any(|t| t[..] == pattern[..])
}

pub fn mean(block: &[f64]) -> f64 {
    block.iter().sum::<f64>() / block.len() as f64
}

/// Unbiased sample variance.
pub fn variance(block: &[f64]) -> f64 {
    let mu = mean(block);
    block.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (block.len() - 1) as f64
}

/// Share of the `len - 2` triplets in `block` that are turning patterns.
pub fn turning_rate(block: &[f64]) -> f64 {
    let hits = block.windows(3).filter(|w| is_turning(w)).count();
    hits as f64 / (block.len() - 2) as f64
}

/// Per-block statistic for `change_type`.
pub fn block_statistics(values: &[f64], layout: &BlockLayout, change_type: ChangeType) -> Vec<f64> {
    let stat: fn(&[f64]) -> f64 = match change_type {
        ChangeType::Mean => mean,
        ChangeType::Variance => variance,
        ChangeType::Frequency => turning_rate,
    };
    layout.blocks(values).into_iter().map(stat).collect()
}

/// `|S_k - (k / n) S_n|` for `k = 1..=n`.
pub fn cusum_trace(stats: &[f64]) -> Vec<f64> {
    let n = stats.len() as f64;
    let total: f64 = stats.iter().sum();
    let mut partial = 0.0;
    stats
        .iter()
        .enumerate()
        .map(|(k, s)| {
            partial += s;
            (partial - (k + 1) as f64 / n * total).abs()
        })
        .collect()
}

/// Trace scaled to `[0, 1]` for statistics in `[0, 1]` and squared, as fed to
/// the encrypted argmax.
pub fn normalized_scores(trace: &[f64]) -> Vec<f64> {
    let scale = 4.0 / trace.len() as f64;
    trace.iter().map(|d| (d * scale) * (d * scale)).collect()
}

/// Difference between the largest and second largest entry; the largest
/// entry itself when there is only one.
pub fn top_two_gap(values: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if second == f64::NEG_INFINITY {
        first
    } else {
        first - second
    }
}

/// Outcome of the plaintext detector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlainDetection {
    /// One-based block of the change, `None` when the trace is flat.
    pub tau_block: Option<usize>,
    pub layout: BlockLayout,
    pub statistics: Vec<f64>,
    pub trace: Vec<f64>,
    /// Top-two gap of the normalized squared trace.
    pub score_gap: f64,
}

impl PlainDetection {
    pub fn tau_index(&self) -> Option<usize> {
        self.tau_block.map(|b| b * self.layout.block_size)
    }
}

/// Plaintext change-point detection on `values` with blocks of `block_size`.
pub fn cpd_plain(values: &[f64], block_size: usize, change_type: ChangeType) -> Result<PlainDetection> {
    let layout = BlockLayout::new(values.len(), block_size, change_type)?;
    let statistics = block_statistics(values, &layout, change_type);
    let trace = cusum_trace(&statistics);
    let mut best = 0;
    for (k, v) in trace.iter().enumerate() {
        if *v > trace[best] {
            best = k;
        }
    }
    let scale: f64 = statistics.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    let tau_block = if trace[best] > 1e-10 * scale { Some(best + 1) } else { None };
    let score_gap = top_two_gap(&normalized_scores(&trace));
    Ok(PlainDetection { tau_block, layout, statistics, trace, score_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pattern_examples() {
        assert_eq!(ordinal_pattern(&[4.2, 3.1, 5.0]), [2, 1, 3]);
        assert_eq!(ordinal_pattern(&[3.1, 5.0, 6.3]), [1, 2, 3]);
        assert_eq!(ordinal_pattern(&[1.0, 1.0, 1.0]), [1, 2, 3]);
    }

    #[test]
    fn monotone_patterns_are_the_only_non_turning_ones() {
        let perms = [[1, 2, 3], [1, 3, 2], [2, 1, 3], [2, 3, 1], [3, 1, 2], [3, 2, 1]];
        for p in perms {
            let w: Vec<f64> = p.iter().map(|v| *v as f64).collect();
            let monotone = p == [1, 2, 3] || p == [3, 2, 1];
            assert_eq!(is_turning(&w), !monotone, "{p:?}");
        }
    }

    #[test]
    fn histogram_of_increasing_series() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let h = pattern_histogram(&xs, 2).unwrap();
        assert_eq!(h.len(), 1);
        assert!((h[&vec![1, 2, 3]] - 8.0 / 10.0).abs() < 1e-12);
        assert!(pattern_histogram(&xs[..2], 2).is_err());
    }

    #[test]
    fn histogram_of_alternating_series_lies_in_turning_set() {
        let xs: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 + i as f64 * 0.01 }).collect();
        let h = pattern_histogram(&xs, 2).unwrap();
        for key in h.keys() {
            assert!(TURNING_PATTERNS.iter().any(|t| t[..] == key[..]));
        }
    }

    #[test]
    fn step_series() {
        let xs: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
        let d = cpd_plain(&xs, 10, ChangeType::Mean).unwrap();
        assert_eq!(d.tau_block, Some(5));
        assert_eq!(d.tau_index(), Some(50));
    }

    #[test]
    fn constant_series_has_no_change() {
        let xs = vec![0.3; 100];
        for t in ChangeType::ALL {
            assert_eq!(cpd_plain(&xs, 10, t).unwrap().tau_block, None, "{t:?}");
        }
    }

    #[test]
    fn cusum_examples() {
        let t = cusum_trace(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(t, [0.5, 1.0, 0.5, 0.0]);
        assert_eq!(top_two_gap(&[0.2, 0.9, 0.5]), 0.9 - 0.5);
    }
}
