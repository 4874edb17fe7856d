//! Encrypted CUSUM over block statistics held in the first matrix column.

use crate::argmax::argmax_fast;
use crate::backend::EvalContext;
use crate::compare::SignParams;
use crate::error::{invalid, Result};
use crate::matrix::{repl_cols, sum_rows_unmasked, BlockMatrix};

fn check(s: &BlockMatrix, n_blocks: usize) -> Result<()> {
    if n_blocks == 0 || n_blocks > s.dim() {
        return Err(invalid("block count must be in 1..=dim"));
    }
    Ok(())
}

/// Prefix sums of the first column, placed in the first row.
///
/// Every row of the replicated column is masked by an upper-triangular
/// pattern so that column `j` keeps entries `0..=j`; a column sum then yields
/// all prefix sums at once. The sum is left unmasked, so rows other than the
/// first hold wrap-around residue.
pub fn partial_sums(ctx: &EvalContext, s: &BlockMatrix, n_blocks: usize) -> Result<BlockMatrix> {
    check(s, n_blocks)?;
    let dim = s.dim();
    let spread = repl_cols(ctx, s)?;
    let triu = ctx.mask(("triu", [dim as u64, n_blocks as u64, 0, 0]), |slots| {
        (0..slots)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                if k < dim * dim && i <= j && j < n_blocks {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    });
    let upper = ctx.mul_plain(spread.data(), &triu)?;
    sum_rows_unmasked(ctx, &s.with_data(upper))
}

/// The total of the first column, replicated across the first row. Rows
/// other than the first hold residue.
pub fn total_sum(ctx: &EvalContext, s: &BlockMatrix) -> Result<BlockMatrix> {
    repl_cols(ctx, &sum_rows_unmasked(ctx, s)?)
}

/// Squared CUSUM deviations scaled into `[0, 1]`, in the first row:
/// `((4 / n) (S_k - (k / n) S_n))^2` for statistics in `[0, 1]`, since the
/// unscaled deviation never exceeds `n / 4`.
pub fn scores(ctx: &EvalContext, s: &BlockMatrix, n_blocks: usize) -> Result<BlockMatrix> {
    let partial = partial_sums(ctx, s, n_blocks)?;
    let total = total_sum(ctx, s)?;
    let dim = s.dim();
    let scale = 4.0 / n_blocks as f64;
    let key = [dim as u64, n_blocks as u64, 0, 0];
    let weight =
        ctx.mask(("cusum_weight", key), |slots| (0..slots).map(|k| if k < n_blocks { scale } else { 0.0 }).collect());
    let ramp = ctx.mask(("cusum_ramp", key), |slots| {
        (0..slots).map(|k| if k < n_blocks { scale * (k + 1) as f64 / n_blocks as f64 } else { 0.0 }).collect()
    });
    let dev = ctx.sub(&ctx.mul_plain(partial.data(), &weight)?, &ctx.mul_plain(total.data(), &ramp)?)?;
    Ok(s.with_data(ctx.mul(&dev, &dev)?))
}

/// Encrypted change-point location: scores followed by the column-product
/// argmax. The first `n_blocks` slots carry the argmax weights.
pub fn cusum(ctx: &EvalContext, s: &BlockMatrix, n_blocks: usize, params: SignParams) -> Result<BlockMatrix> {
    let u = scores(ctx, s, n_blocks)?;
    argmax_fast(ctx, &u, n_blocks, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argmax::OneHotReading;
    use crate::backend::ContextParams;
    use crate::oracle;
    use alloc::vec::Vec;

    fn column(values: &[f64], dim: usize) -> (EvalContext, BlockMatrix) {
        let ctx = EvalContext::new(ContextParams::new(dim * dim)).unwrap();
        let rows: Vec<[f64; 1]> = values.iter().map(|v| [*v]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        let s = BlockMatrix::encrypt_rows(&ctx, dim, &refs).unwrap();
        (ctx, s)
    }

    fn prefix(values: &[f64], dim: usize) -> Vec<f64> {
        let (ctx, s) = column(values, dim);
        partial_sums(&ctx, &s, values.len()).unwrap().row(0)[..values.len()].to_vec()
    }

    #[test]
    fn prefix_sum_examples() {
        assert_eq!(prefix(&[1.0, 1.0, 1.0, 1.0], 4), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(prefix(&[0.0; 4], 4), [0.0; 4]);
        let got = prefix(&[0.2, 0.5, 0.1], 4);
        for (g, w) in got.iter().zip([0.2, 0.7, 0.8]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn prefix_sum_cost() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let (ctx, s) = column(&values, 128);
        partial_sums(&ctx, &s, 100).unwrap();
        let c = ctx.counts();
        assert_eq!((c.rotations, c.mults()), (14, 1));
    }

    fn locate(values: &[f64], dim: usize) -> OneHotReading {
        let (ctx, s) = column(values, dim);
        let out = cusum(&ctx, &s, values.len(), SignParams::default()).unwrap();
        OneHotReading::read(out.row(0), values.len()).unwrap()
    }

    #[test]
    fn locates_steps() {
        let r = locate(&[0.0, 0.0, 1.0, 1.0], 4);
        assert_eq!(r.index + 1, 2);
        assert!(r.is_clean());
        let r = locate(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0], 8);
        assert_eq!(r.index + 1, 3);
        assert!(r.is_clean());
    }

    #[test]
    fn constant_statistics_are_ambiguous() {
        let r = locate(&[0.4; 8], 8);
        assert!(!r.is_dominant());
    }

    #[test]
    fn scores_match_oracle() {
        let values = [0.1, 0.3, 0.2, 0.8, 0.9, 0.7, 0.75];
        let (ctx, s) = column(&values, 8);
        let u = scores(&ctx, &s, 7).unwrap();
        let want = oracle::normalized_scores(&oracle::cusum_trace(&values));
        for (g, w) in u.row(0).iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(u.row(0)[7] == 0.0);
    }
}
