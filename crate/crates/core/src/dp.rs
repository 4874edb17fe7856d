//! Local differential privacy baseline: clip, add Gaussian noise to every
//! point, then run the plaintext detector on the noisy series.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::oracle::cpd_plain;
use crate::pipeline::ChangePointResult;
use crate::summarize::ChangeType;

/// Privacy budget and clipping radius.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub clip: f64,
}

impl DpParams {
    pub fn new(epsilon: f64, delta: f64, clip: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(invalid("clipping radius must be positive"));
        }
        Ok(DpParams { epsilon, delta, clip })
    }

    /// `delta = 1 / n^2` and clipping radius one.
    pub fn for_length(epsilon: f64, n: usize) -> Result<Self> {
        let n = n as f64;
        Self::new(epsilon, 1.0 / (n * n), 1.0)
    }

    pub fn sigma(&self) -> f64 {
        sigma_for(self.epsilon, self.delta, self.clip)
    }
}

/// Clamps every value into `[-radius, radius]`.
pub fn clip(values: &[f64], radius: f64) -> Vec<f64> {
    values.iter().map(|v| v.clamp(-radius, radius)).collect()
}

fn sigma_for(epsilon: f64, delta: f64, clip: f64) -> f64 {
    let l = libm::log(1.0 / delta);
    core::f64::consts::SQRT_2 * clip / epsilon * (libm::sqrt(l) + libm::sqrt(l + epsilon))
}

/// Noise scale making the per-point Gaussian mechanism `(epsilon, delta)`-DP
/// on values clipped to `[-clip, clip]`.
pub fn sigma_dp(epsilon: f64, delta: f64, clip: f64) -> Result<f64> {
    Ok(DpParams::new(epsilon, delta, clip)?.sigma())
}

/// Privacy loss of Gaussian noise `sigma` on sensitivity `2 * clip`, obtained
/// from the Renyi bound: `D^2 / (2 s^2) + D sqrt(2 ln(1/delta)) / s`.
pub fn epsilon_for_sigma(sigma: f64, delta: f64, clip: f64) -> f64 {
    let sensitivity = 2.0 * clip;
    let l = libm::log(1.0 / delta);
    sensitivity * sensitivity / (2.0 * sigma * sigma) + sensitivity * libm::sqrt(2.0 * l) / sigma
}

/// `|estimate - truth| / truth`.
pub fn relative_error(estimate: usize, truth: usize) -> Result<f64> {
    if truth == 0 {
        return Err(invalid("true change point must be positive"));
    }
    Ok(estimate.abs_diff(truth) as f64 / truth as f64)
}

/// Private detection with the noise calibrated from `params`.
pub fn dp_cpd(
    values: &[f64],
    block_size: usize,
    change_type: ChangeType,
    params: &DpParams,
    seed: u64,
) -> Result<ChangePointResult> {
    dp_cpd_with_sigma(values, block_size, change_type, params.clip, params.sigma(), seed)
}

/// Private detection with an explicit noise scale. The noisy series is
/// normalized with bounds `[-clip - 6 sigma, clip + 6 sigma]` before detection.
pub fn dp_cpd_with_sigma(
    values: &[f64],
    block_size: usize,
    change_type: ChangeType,
    clip_radius: f64,
    sigma: f64,
    seed: u64,
) -> Result<ChangePointResult> {
    if clip_radius.is_nan() || clip_radius <= 0.0 || !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid("clipping radius and noise scale must be positive and finite"));
    }
    let mut noisy = clip(values, clip_radius);
    if sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|_| invalid("bad noise scale"))?;
        for v in &mut noisy {
            *v += normal.sample(&mut rng);
        }
    }
    let reach = clip_radius + 6.0 * sigma;
    for v in &mut noisy {
        *v = ((*v + reach) / (2.0 * reach)).clamp(0.0, 1.0);
    }
    let found = cpd_plain(&noisy, block_size, change_type)?;
    Ok(ChangePointResult::plain(found.tau_block, change_type, found.layout))
}
