//! Row and column aggregation kernels on a square matrix packed row-major
//! into one ciphertext. Each kernel costs `log2(dim)` rotations.

use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{CipherVector, EvalContext, PlainVector};
use crate::error::{invalid, Result};

/// A `dim x dim` matrix stored row-major in the leading `dim^2` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    dim: usize,
    data: CipherVector,
}

impl BlockMatrix {
    /// Wraps `data`; `dim` must be a power of two with `dim^2` fitting the vector.
    pub fn new(dim: usize, data: CipherVector) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(invalid("matrix dimension must be a power of two"));
        }
        if dim.checked_mul(dim).is_none_or(|sq| sq > data.len()) {
            return Err(invalid("matrix does not fit into the ciphertext"));
        }
        Ok(BlockMatrix { dim, data })
    }

    /// Encrypts a row-major matrix given as rows of at most `dim` entries.
    pub fn encrypt_rows(ctx: &EvalContext, dim: usize, rows: &[&[f64]]) -> Result<Self> {
        if rows.len() > dim || rows.iter().any(|r| r.len() > dim) {
            return Err(invalid("rows exceed the matrix dimension"));
        }
        let mut flat = vec![0.0; dim * dim];
        for (r, row) in rows.iter().enumerate() {
            flat[r * dim..r * dim + row.len()].copy_from_slice(row);
        }
        Self::new(dim, ctx.encrypt(&flat)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &CipherVector {
        &self.data
    }

    pub fn into_data(self) -> CipherVector {
        self.data
    }

    pub fn depth(&self) -> usize {
        self.data.depth()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data.decode()[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data.decode()[row * self.dim..(row + 1) * self.dim]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub(crate) fn with_data(&self, data: CipherVector) -> Self {
        BlockMatrix { dim: self.dim, data }
    }
}

/// Rotation and masking schedule for the aggregation kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Across rows, into the first row.
    Rows,
    /// Across columns, into the first column.
    Cols,
}

fn log2(dim: usize) -> u32 {
    dim.trailing_zeros()
}

/// Indicator of the first row.
pub fn first_row_mask(ctx: &EvalContext, dim: usize) -> alloc::sync::Arc<PlainVector> {
    ctx.mask(("first_row", [dim as u64, 0, 0, 0]), |n| (0..n).map(|i| if i < dim { 1.0 } else { 0.0 }).collect())
}

/// Indicator of the first column.
pub fn first_col_mask(ctx: &EvalContext, dim: usize) -> alloc::sync::Arc<PlainVector> {
    ctx.mask(("first_col", [dim as u64, 0, 0, 0]), |n| {
        (0..n).map(|i| if i < dim * dim && i % dim == 0 { 1.0 } else { 0.0 }).collect()
    })
}

fn fold(ctx: &EvalContext, x: &BlockMatrix, step: impl Fn(u32) -> isize) -> Result<BlockMatrix> {
    let mut acc = x.data.clone();
    for i in 0..log2(x.dim) {
        let shifted = ctx.rotate(&acc, step(i))?;
        acc = ctx.add(&acc, &shifted)?;
    }
    Ok(x.with_data(acc))
}

/// Column sums without the final mask; row 0 is exact, other rows hold
/// partial wrap-around sums.
pub fn sum_rows_unmasked(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let dim = x.dim as isize;
    fold(ctx, x, |i| dim << i)
}

/// Row sums without the final mask; column 0 is exact.
pub fn sum_cols_unmasked(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    fold(ctx, x, |i| 1 << i)
}

/// Column sums placed in the first row; every other slot is zero.
pub fn sum_rows(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let mask = first_row_mask(ctx, x.dim);
    sum_masked(ctx, x, Axis::Rows, &mask)
}

/// Row sums placed in the first column; every other slot is zero.
pub fn sum_cols(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let mask = first_col_mask(ctx, x.dim);
    sum_masked(ctx, x, Axis::Cols, &mask)
}

/// Aggregates along `axis` and multiplies by `mask` instead of the plain
/// first-row or first-column indicator, so per-slot scale factors ride on
/// the masking multiplication.
pub fn sum_masked(ctx: &EvalContext, x: &BlockMatrix, axis: Axis, mask: &PlainVector) -> Result<BlockMatrix> {
    let summed = match axis {
        Axis::Rows => sum_rows_unmasked(ctx, x)?,
        Axis::Cols => sum_cols_unmasked(ctx, x)?,
    };
    Ok(x.with_data(ctx.mul_plain(summed.data(), mask)?))
}

/// Copies the first row into every row. Other rows must be zero on input.
pub fn repl_rows(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let dim = x.dim as isize;
    fold(ctx, x, |i| -(dim << i))
}

/// Copies the first column into every column. Other columns must be zero on input.
pub fn repl_cols(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    fold(ctx, x, |i| -(1 << i))
}

/// Moves the first row into the first column. Other rows must be zero on input.
pub fn row_to_col(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let spread = (x.dim * (x.dim - 1)) as isize;
    let moved = fold(ctx, x, |i| -(spread >> (i + 1)))?;
    let mask = first_col_mask(ctx, x.dim);
    Ok(x.with_data(ctx.mul_plain(moved.data(), &mask)?))
}

/// Moves the first column into the first row. Other columns must be zero on input.
pub fn col_to_row(ctx: &EvalContext, x: &BlockMatrix) -> Result<BlockMatrix> {
    let spread = (x.dim * (x.dim - 1)) as isize;
    let moved = fold(ctx, x, |i| spread >> (i + 1))?;
    let mask = first_row_mask(ctx, x.dim);
    Ok(x.with_data(ctx.mul_plain(moved.data(), &mask)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ContextParams;

    fn ctx(slots: usize) -> EvalContext {
        EvalContext::new(ContextParams::new(slots)).unwrap()
    }

    fn matrix(c: &EvalContext, dim: usize, rows: &[&[f64]]) -> BlockMatrix {
        BlockMatrix::encrypt_rows(c, dim, rows).unwrap()
    }

    #[test]
    fn sums_on_two_by_two() {
        let c = ctx(4);
        let x = matrix(&c, 2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(sum_rows(&c, &x).unwrap().data().decode(), &[4.0, 6.0, 0.0, 0.0]);
        assert_eq!(sum_cols(&c, &x).unwrap().data().decode(), &[3.0, 0.0, 7.0, 0.0]);
    }

    #[test]
    fn replication() {
        let c = ctx(16);
        let x = matrix(&c, 4, &[&[1.0, 2.0, 3.0, 4.0]]);
        let r = repl_rows(&c, &x).unwrap();
        for row in 0..4 {
            assert_eq!(r.row(row), &[1.0, 2.0, 3.0, 4.0]);
        }
        let col = matrix(&c, 4, &[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let r = repl_cols(&c, &col).unwrap();
        for row in 0..4 {
            assert_eq!(r.row(row), &[row as f64 + 1.0; 4]);
        }
    }

    #[test]
    fn transposition_round_trip() {
        let c = ctx(64);
        let x = matrix(&c, 8, &[&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]]);
        let t = row_to_col(&c, &x).unwrap();
        assert_eq!(t.column(0), x.row(0));
        let zero_elsewhere = (0..64).filter(|i| i % 8 != 0).all(|i| t.data().decode()[i] == 0.0);
        assert!(zero_elsewhere);
        let back = col_to_row(&c, &t).unwrap();
        assert_eq!(back.data().decode(), x.data().decode());
    }

    #[test]
    fn rotation_counts() {
        let c = ctx(256);
        let x = matrix(&c, 16, &[&[1.0; 16]]);
        let before = c.counts();
        sum_rows(&c, &x).unwrap();
        assert_eq!((c.counts() - before).rotations, 4);
        let before = c.counts();
        row_to_col(&c, &x).unwrap();
        let d = c.counts() - before;
        assert_eq!((d.rotations, d.plain_mults), (4, 1));
    }

    #[test]
    fn single_element() {
        let c = ctx(1);
        let x = matrix(&c, 1, &[&[5.0]]);
        for out in [
            sum_rows(&c, &x).unwrap(),
            sum_cols(&c, &x).unwrap(),
            repl_rows(&c, &x).unwrap(),
            repl_cols(&c, &x).unwrap(),
            row_to_col(&c, &x).unwrap(),
            col_to_row(&c, &x).unwrap(),
        ] {
            assert_eq!(out.data().decode(), &[5.0]);
        }
        assert_eq!(c.counts().rotations, 0);
    }

    #[test]
    fn larger_context_than_matrix() {
        let c = ctx(64);
        let x = matrix(&c, 4, &[&[1.0, 2.0, 3.0, 4.0]]);
        let t = row_to_col(&c, &x).unwrap();
        assert_eq!(t.column(0), &[1.0, 2.0, 3.0, 4.0]);
        assert!(t.data().decode()[16..].iter().all(|v| *v == 0.0));
        let back = col_to_row(&c, &t).unwrap();
        assert_eq!(back.row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let c = ctx(16);
        let v = c.encrypt(&[]).unwrap();
        assert!(BlockMatrix::new(3, v.clone()).is_err());
        assert!(BlockMatrix::new(8, v).is_err());
    }
}
