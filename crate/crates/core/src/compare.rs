//! Polynomial comparator built from composite odd degree-7 sign approximations.
//!
//! `f` has a flat slope at `+-1` and `g` pushes small inputs towards `+-1`
//! quickly; `f^df(g^dg(x))` approximates `sign(x)` on `[-1, 1]`.

use crate::backend::{CipherVector, EvalContext, PlainVector};
use crate::error::{invalid, Result};

const F_COEFFS: [f64; 4] = [35.0 / 16.0, -35.0 / 16.0, 21.0 / 16.0, -5.0 / 16.0];
const G_COEFFS: [f64; 4] = [4589.0 / 1024.0, -16577.0 / 1024.0, 25614.0 / 1024.0, -12860.0 / 1024.0];

/// Number of compositions of each polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignParams {
    pub df: u32,
    pub dg: u32,
}

impl Default for SignParams {
    fn default() -> Self {
        SignParams { df: 2, dg: 4 }
    }
}

impl SignParams {
    pub fn new(df: u32, dg: u32) -> Result<Self> {
        if df == 0 || dg == 0 {
            return Err(invalid("composition counts must be at least one"));
        }
        Ok(SignParams { df, dg })
    }

    fn stages(&self) -> impl Iterator<Item = &'static [f64; 4]> {
        core::iter::repeat_n(&G_COEFFS, self.dg as usize).chain(core::iter::repeat_n(&F_COEFFS, self.df as usize))
    }

    /// Cost of one comparison.
    pub fn cost(&self) -> ComparisonCost {
        let stages = u64::from(self.df + self.dg);
        ComparisonCost { cipher_mults: 5 * stages, plain_mults: 4 * stages, depth: 3 * stages as usize }
    }
}

/// Operation cost of a single SIMD comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonCost {
    pub cipher_mults: u64,
    pub plain_mults: u64,
    pub depth: usize,
}

/// Slot-wise factor or offset applied to a comparator output.
#[derive(Debug, Clone, Copy)]
pub enum Affine<'a> {
    Uniform(f64),
    Slots(&'a PlainVector),
}

fn odd7(coeffs: &[f64; 4], x: f64) -> f64 {
    let x2 = x * x;
    x * (coeffs[0] + x2 * (coeffs[1] + x2 * (coeffs[2] + x2 * coeffs[3])))
}

/// Reference evaluation of `f`.
pub fn f_poly(x: f64) -> f64 {
    odd7(&F_COEFFS, x)
}

/// Reference evaluation of `g`.
pub fn g_poly(x: f64) -> f64 {
    odd7(&G_COEFFS, x)
}

/// Reference evaluation of the composite sign approximation.
pub fn sign_scalar(x: f64, params: SignParams) -> f64 {
    params.stages().fold(x, |acc, c| odd7(c, acc))
}

/// Reference evaluation of the comparator, close to 1 when `x > y`.
pub fn cmp_scalar(x: f64, y: f64, params: SignParams) -> f64 {
    (sign_scalar(x - y, params) + 1.0) / 2.0
}

/// Smallest grid gap `gamma` such that the comparator stays within `tol` of
/// the step function for every gap in `[gamma, 1]`.
pub fn resolution(params: SignParams, tol: f64, step: f64) -> f64 {
    let steps = libm::ceil(1.0 / step) as usize;
    let mut last_bad = 0;
    for i in 1..=steps {
        let d = (i as f64 * step).min(1.0);
        if (1.0 - cmp_scalar(d, 0.0, params)).abs() > tol {
            last_bad = i;
        }
    }
    ((last_bad + 1) as f64 * step).min(1.0)
}

fn odd7_encrypted(ctx: &EvalContext, x: &CipherVector, coeffs: &[f64; 4], scale: Affine<'_>) -> Result<CipherVector> {
    let times = |c: f64| match scale {
        Affine::Uniform(w) => ctx.mul_const(x, c * w),
        Affine::Slots(w) => ctx.mul_plain(x, &w.scaled(c)),
    };
    let x2 = ctx.mul(x, x)?;
    let x4 = ctx.mul(&x2, &x2)?;
    let linear = times(coeffs[0])?;
    let cubic = ctx.mul(&times(coeffs[1])?, &x2)?;
    let seventh = ctx.mul(&times(coeffs[3])?, &x2)?;
    let upper = ctx.mul(&ctx.add(&times(coeffs[2])?, &seventh)?, &x4)?;
    ctx.add(&ctx.add(&linear, &cubic)?, &upper)
}

/// Evaluates `weight * sign(d) + offset`. The weight rides on the coefficient
/// multiplications of the last stage, so it costs no extra level.
pub fn sign_affine(
    ctx: &EvalContext,
    d: &CipherVector,
    params: SignParams,
    weight: Affine<'_>,
    offset: Affine<'_>,
) -> Result<CipherVector> {
    let stages = (params.df + params.dg) as usize;
    let mut acc = d.clone();
    for (i, coeffs) in params.stages().enumerate() {
        let scale = if i + 1 == stages { weight } else { Affine::Uniform(1.0) };
        acc = odd7_encrypted(ctx, &acc, coeffs, scale)?;
    }
    match offset {
        Affine::Uniform(0.0) => Ok(acc),
        Affine::Uniform(c) => ctx.add_const(&acc, c),
        Affine::Slots(p) => ctx.add_plain(&acc, p),
    }
}

/// Encrypted sign approximation.
pub fn compose_sign(ctx: &EvalContext, x: &CipherVector, params: SignParams) -> Result<CipherVector> {
    sign_affine(ctx, x, params, Affine::Uniform(1.0), Affine::Uniform(0.0))
}

/// Encrypted comparison `(sign(x - y) + 1) / 2`.
pub fn cmp(ctx: &EvalContext, x: &CipherVector, y: &CipherVector, params: SignParams) -> Result<CipherVector> {
    cmp_affine(ctx, x, y, params, Affine::Uniform(0.5), Affine::Uniform(0.5))
}

/// Comparison against plaintext values.
pub fn cmp_plain(ctx: &EvalContext, x: &CipherVector, y: &PlainVector, params: SignParams) -> Result<CipherVector> {
    let d = ctx.sub_plain(x, y)?;
    ctx.record_comparison();
    sign_affine(ctx, &d, params, Affine::Uniform(0.5), Affine::Uniform(0.5))
}

/// Comparison whose output is `weight * sign(x - y) + offset`. With weight and
/// offset both `a / 2` this is the comparison masked by `a`.
pub fn cmp_affine(
    ctx: &EvalContext,
    x: &CipherVector,
    y: &CipherVector,
    params: SignParams,
    weight: Affine<'_>,
    offset: Affine<'_>,
) -> Result<CipherVector> {
    let d = ctx.sub(x, y)?;
    ctx.record_comparison();
    sign_affine(ctx, &d, params, weight, offset)
}

/// Maps ranks in `1..=n` to an indicator of rank `n`. Ranks are scaled into
/// `[0, 1]` and tested against the two thresholds bracketing `n`.
pub fn indicator(ctx: &EvalContext, ranks: &CipherVector, n: usize, params: SignParams) -> Result<CipherVector> {
    if n == 0 {
        return Err(invalid("indicator needs at least one element"));
    }
    let unit = 1.0 / (n as f64 + 1.0);
    let scaled = ctx.mul_const(ranks, unit)?;
    let lower = ctx.add_const(&scaled, -(n as f64 - 0.5) * unit)?;
    ctx.record_comparison();
    let above = sign_affine(ctx, &lower, params, Affine::Uniform(0.5), Affine::Uniform(0.5))?;
    let upper = ctx.add_const(&scaled, -(n as f64 + 0.5) * unit)?;
    ctx.record_comparison();
    let below = sign_affine(ctx, &upper, params, Affine::Uniform(-0.5), Affine::Uniform(0.5))?;
    ctx.mul(&above, &below)
}
