//! Block layout and the encrypted block summaries.
//!
//! A series of length `n` is cut into blocks of `m` consecutive points, one
//! block per matrix row. A trailing partial block of `m'` points is kept when
//! its statistic is defined and dropped otherwise.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{EvalContext, PlainVector};
use crate::compare::{cmp_affine, Affine, SignParams};
use crate::error::{invalid, Result};
use crate::matrix::{repl_cols, sum_masked, Axis, BlockMatrix};

/// Which distributional property is monitored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ChangeType {
    Mean,
    Variance,
    Frequency,
}

impl ChangeType {
    pub const ALL: [ChangeType; 3] = [ChangeType::Mean, ChangeType::Variance, ChangeType::Frequency];

    /// Fewest points for which the block statistic is defined.
    pub fn min_block_len(self) -> usize {
        match self {
            ChangeType::Mean => 1,
            ChangeType::Variance => 2,
            ChangeType::Frequency => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChangeType::Mean => "mean",
            ChangeType::Variance => "variance",
            ChangeType::Frequency => "frequency",
        }
    }
}

impl core::str::FromStr for ChangeType {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ChangeType::Mean),
            "variance" | "var" => Ok(ChangeType::Variance),
            "frequency" | "freq" => Ok(ChangeType::Frequency),
            _ => Err(invalid("change type must be mean, variance or frequency")),
        }
    }
}

/// How a series is cut into blocks and padded into a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockLayout {
    pub block_size: usize,
    pub n_blocks: usize,
    /// Length of the final block, equal to `block_size` when it is full.
    pub last_len: usize,
    /// Trailing points left out because they cannot form a usable block.
    pub dropped: usize,
    /// Padded matrix dimension, a power of two at least `n_blocks` and `block_size`.
    pub dim: usize,
}

impl BlockLayout {
    pub fn new(n: usize, block_size: usize, change_type: ChangeType) -> Result<Self> {
        let min = change_type.min_block_len();
        if block_size < min {
            return Err(invalid("block size too small for the change type"));
        }
        let full = n / block_size;
        let rem = n % block_size;
        let (n_blocks, last_len, dropped) = if rem >= min { (full + 1, rem, 0) } else { (full, block_size, rem) };
        if n_blocks == 0 {
            return Err(invalid("series shorter than one block"));
        }
        let dim = n_blocks.max(block_size).next_power_of_two();
        Ok(BlockLayout { block_size, n_blocks, last_len, dropped, dim })
    }

    /// Number of points that enter the statistic.
    pub fn used_len(&self) -> usize {
        (self.n_blocks - 1) * self.block_size + self.last_len
    }

    pub fn block_len(&self, row: usize) -> usize {
        if row + 1 == self.n_blocks {
            self.last_len
        } else if row < self.n_blocks {
            self.block_size
        } else {
            0
        }
    }

    pub fn slot_count(&self) -> usize {
        self.dim * self.dim
    }

    fn key(&self) -> [u64; 4] {
        [self.dim as u64, self.block_size as u64, self.n_blocks as u64, self.last_len as u64]
    }

    fn grid(&self, ctx: &EvalContext, tag: &'static str, value: impl Fn(usize, usize) -> f64) -> Arc<PlainVector> {
        let dim = self.dim;
        ctx.mask((tag, self.key()), |slots| {
            (0..slots).map(|s| if s < dim * dim { value(s / dim, s % dim) } else { 0.0 }).collect()
        })
    }

    /// First-column mask carrying `1 / (len - shrink)` for every block.
    fn column_scale(&self, ctx: &EvalContext, tag: &'static str, shrink: usize) -> Arc<PlainVector> {
        self.grid(ctx, tag, |r, c| {
            let len = self.block_len(r);
            if c == 0 && len > 0 {
                1.0 / (len - shrink) as f64
            } else {
                0.0
            }
        })
    }

    /// Packs `values` one block per row.
    pub fn encode(&self, ctx: &EvalContext, values: &[f64]) -> Result<BlockMatrix> {
        if values.len() < self.used_len() {
            return Err(invalid("series shorter than the layout"));
        }
        let mut flat = vec![0.0; self.dim * self.dim];
        for r in 0..self.n_blocks {
            let start = r * self.block_size;
            let len = self.block_len(r);
            flat[r * self.dim..r * self.dim + len].copy_from_slice(&values[start..start + len]);
        }
        BlockMatrix::new(self.dim, ctx.encrypt(&flat)?)
    }

    /// Splits `values` into the blocks of this layout.
    pub fn blocks<'a>(&self, values: &'a [f64]) -> Vec<&'a [f64]> {
        (0..self.n_blocks).map(|r| &values[r * self.block_size..r * self.block_size + self.block_len(r)]).collect()
    }
}

/// Block means in the first column.
pub fn block_mean(ctx: &EvalContext, x: &BlockMatrix, layout: &BlockLayout) -> Result<BlockMatrix> {
    let scale = layout.column_scale(ctx, "mean_scale", 0);
    sum_masked(ctx, x, Axis::Cols, &scale)
}

/// Unbiased block variances in the first column.
pub fn block_variance(ctx: &EvalContext, x: &BlockMatrix, layout: &BlockLayout) -> Result<BlockMatrix> {
    let mean = block_mean(ctx, x, layout)?;
    let spread = repl_cols(ctx, &mean)?;
    let valid = layout.grid(ctx, "valid", |r, c| if c < layout.block_len(r) { 1.0 } else { 0.0 });
    let centred_mean = ctx.mul_plain(spread.data(), &valid)?;
    let dev = ctx.sub(x.data(), &centred_mean)?;
    let sq = ctx.mul(&dev, &dev)?;
    let scale = layout.column_scale(ctx, "variance_scale", 1);
    sum_masked(ctx, &x.with_data(sq), Axis::Cols, &scale)
}

/// Block turning rates in the first column.
///
/// With `c_i = cmp(x_i, x_{i+1})`, the triplet `(i - 1, i, i + 1)` is
/// monotone exactly when `c_{i-1} == c_i`, so `1 - (c_{i-1} + c_i - 1)^2`
/// flags turning triplets at slot `i`. The comparator output is masked to the
/// pairs inside each block through its affine map, and the constants `k, K` in
/// `K - (c_{i-1} + c_i - k)^2` zero the two edge slots of a block whenever the
/// edge comparison is decided. An exact tie at an edge leaves at most `1/4`.
pub fn turning_rates(
    ctx: &EvalContext,
    x: &BlockMatrix,
    layout: &BlockLayout,
    params: SignParams,
) -> Result<BlockMatrix> {
    if layout.last_len < 3 || layout.block_size < 3 {
        return Err(invalid("turning rates need blocks of at least three points"));
    }
    let pair = layout.grid(ctx, "turning_pair", |r, c| if c + 2 <= layout.block_len(r) { 0.5 } else { 0.0 });
    let next = ctx.rotate(x.data(), 1)?;
    let down = cmp_affine(ctx, x.data(), &next, params, Affine::Slots(&pair), Affine::Slots(&pair))?;
    let edge = |r: usize, c: usize| {
        let len = layout.block_len(r);
        if c >= 1 && c + 2 <= len {
            (1.0, 1.0)
        } else if len > 0 && (c == 0 || c + 1 == len) {
            (0.5, 0.25)
        } else {
            (0.0, 0.0)
        }
    };
    let centre = layout.grid(ctx, "turning_centre", |r, c| edge(r, c).0);
    let ceiling = layout.grid(ctx, "turning_ceiling", |r, c| edge(r, c).1);
    let prev = ctx.rotate(&down, -1)?;
    let y = ctx.sub_plain(&ctx.add(&down, &prev)?, &centre)?;
    let sq = ctx.mul(&y, &y)?;
    let flags = ctx.plain_sub(&ceiling, &sq)?;
    let scale = layout.column_scale(ctx, "turning_scale", 2);
    sum_masked(ctx, &x.with_data(flags), Axis::Cols, &scale)
}

/// Dispatches to the summary for `change_type`.
pub fn summarize(
    ctx: &EvalContext,
    x: &BlockMatrix,
    layout: &BlockLayout,
    change_type: ChangeType,
    params: SignParams,
) -> Result<BlockMatrix> {
    match change_type {
        ChangeType::Mean => block_mean(ctx, x, layout),
        ChangeType::Variance => block_variance(ctx, x, layout),
        ChangeType::Frequency => turning_rates(ctx, x, layout, params),
    }
}
