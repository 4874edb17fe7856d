//! Encrypted ranking and argmax over values held in the first row of a
//! [`BlockMatrix`].

use alloc::sync::Arc;

use crate::backend::{EvalContext, PlainVector};
use crate::compare::{cmp_affine, indicator, Affine, SignParams};
use crate::error::{invalid, Result};
use crate::matrix::{repl_cols, repl_rows, row_to_col, sum_rows, BlockMatrix};

/// Relative margin by which the decoded peak must beat the runner-up.
pub const DOMINANCE_MARGIN: f64 = 1e-9;

fn check(x: &BlockMatrix, n: usize) -> Result<()> {
    if n == 0 || n > x.dim() {
        return Err(invalid("element count must be in 1..=dim"));
    }
    Ok(())
}

fn grid_mask(
    ctx: &EvalContext,
    tag: &'static str,
    dim: usize,
    n: usize,
    value: impl Fn(usize, usize) -> f64,
) -> Arc<PlainVector> {
    ctx.mask((tag, [dim as u64, n as u64, 0, 0]), |slots| {
        (0..slots).map(|s| if s < dim * dim { value(s / dim, s % dim) } else { 0.0 }).collect()
    })
}

/// Pairwise comparison grid: entry `(i, j)` compares element `j` against element `i`.
fn spread(ctx: &EvalContext, x: &BlockMatrix) -> Result<(BlockMatrix, BlockMatrix)> {
    let by_column = repl_rows(ctx, x)?;
    let by_row = repl_cols(ctx, &row_to_col(ctx, x)?)?;
    Ok((by_column, by_row))
}

/// Ranks of the first `n` entries of row 0, smallest value ranked 1. Ties
/// contribute one half to each side.
pub fn rank(ctx: &EvalContext, x: &BlockMatrix, n: usize, params: SignParams) -> Result<BlockMatrix> {
    check(x, n)?;
    let dim = x.dim();
    let (by_column, by_row) = spread(ctx, x)?;
    let half = grid_mask(ctx, "rank_half", dim, n, |i, j| if i < n && j < n { 0.5 } else { 0.0 });
    let wins = cmp_affine(ctx, by_column.data(), by_row.data(), params, Affine::Slots(&half), Affine::Slots(&half))?;
    let totals = sum_rows(ctx, &x.with_data(wins))?;
    let self_tie = ctx.mask(("rank_self", [dim as u64, n as u64, 0, 0]), |slots| {
        (0..slots).map(|s| if s < n { 0.5 } else { 0.0 }).collect()
    });
    Ok(x.with_data(ctx.add_plain(totals.data(), &self_tie)?))
}

/// Argmax through ranking followed by an indicator of the top rank.
pub fn argmax_baseline(ctx: &EvalContext, x: &BlockMatrix, n: usize, params: SignParams) -> Result<BlockMatrix> {
    let ranks = rank(ctx, x, n, params)?;
    Ok(x.with_data(indicator(ctx, ranks.data(), n, params)?))
}

/// Argmax as the column-wise product of the comparison grid.
///
/// Column `j` multiplies `cmp(x_j, x_i)` over all `i`, which is close to one
/// only for the maximum. The diagonal and the padding rows are set to one and
/// the padding columns to zero through the comparator's output affine map.
/// The product takes `log2(dim)` rotate-and-multiply steps.
pub fn argmax_fast(ctx: &EvalContext, x: &BlockMatrix, n: usize, params: SignParams) -> Result<BlockMatrix> {
    check(x, n)?;
    let dim = x.dim();
    let (by_column, by_row) = spread(ctx, x)?;
    let weight = grid_mask(ctx, "argmax_weight", dim, n, |i, j| if i < n && j < n && i != j { 0.5 } else { 0.0 });
    let offset = grid_mask(ctx, "argmax_offset", dim, n, |i, j| {
        if j >= n {
            0.0
        } else if i >= n || i == j {
            1.0
        } else {
            0.5
        }
    });
    let mut acc =
        cmp_affine(ctx, by_column.data(), by_row.data(), params, Affine::Slots(&weight), Affine::Slots(&offset))?;
    for i in 0..dim.trailing_zeros() {
        let shifted = ctx.rotate(&acc, (dim << i) as isize)?;
        acc = ctx.mul(&acc, &shifted)?;
    }
    Ok(x.with_data(acc))
}

/// Client-side reading of a decrypted argmax vector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneHotReading {
    /// Position of the largest decoded value (first one on ties).
    pub index: usize,
    pub peak: f64,
    /// Largest value at any other position; zero when `n == 1`.
    pub runner_up: f64,
    /// First position whose value exceeds one half, if any.
    pub first_above_half: Option<usize>,
}

impl OneHotReading {
    /// Reads the first `n` slots.
    pub fn read(values: &[f64], n: usize) -> Result<Self> {
        if n == 0 || n > values.len() {
            return Err(invalid("element count must be in 1..=len"));
        }
        let head = &values[..n];
        let mut index = 0;
        for (i, v) in head.iter().enumerate() {
            if *v > head[index] {
                index = i;
            }
        }
        let runner_up = head.iter().enumerate().filter(|(i, _)| *i != index).map(|(_, v)| *v).fold(0.0_f64, f64::max);
        Ok(OneHotReading { index, peak: head[index], runner_up, first_above_half: head.iter().position(|v| *v > 0.5) })
    }

    /// The peak is positive and strictly dominates every other slot.
    pub fn is_dominant(&self) -> bool {
        self.peak > 0.0 && self.peak > self.runner_up * (1.0 + DOMINANCE_MARGIN)
    }

    /// Exactly the peak clears one half.
    pub fn is_clean(&self) -> bool {
        self.first_above_half == Some(self.index) && self.runner_up <= 0.5
    }
}
