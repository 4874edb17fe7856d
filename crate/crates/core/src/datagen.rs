//! Synthetic series with one planted change point.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{invalid, Result};
use crate::pipeline::{TimeSeries, MIN_SERIES_LEN};

/// Degrees of freedom of the Student-t noise.
pub const STUDENT_T_DOF: f64 = 5.0;

/// Shape of the noise. Every family is scaled to zero mean and unit variance
/// and then multiplied by the requested standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Noise {
    Gaussian,
    Uniform,
    Laplace,
    StudentT,
}

impl Noise {
    pub fn sample_unit<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Uniform => {
                let half_width = libm::sqrt(3.0);
                rng.random_range(-half_width..half_width)
            }
            Noise::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                let scale = core::f64::consts::FRAC_1_SQRT_2;
                -scale * u.signum() * libm::log(1.0 - 2.0 * u.abs())
            }
            Noise::StudentT => {
                let t: f64 = StudentT::new(STUDENT_T_DOF).expect("valid dof").sample(rng);
                t * libm::sqrt((STUDENT_T_DOF - 2.0) / STUDENT_T_DOF)
            }
        }
    }
}

impl core::str::FromStr for Noise {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Noise::Gaussian),
            "uniform" => Ok(Noise::Uniform),
            "laplace" => Ok(Noise::Laplace),
            "student-t" | "t" | "studentt" => Ok(Noise::StudentT),
            _ => Err(invalid("noise must be gaussian, uniform, laplace or student-t")),
        }
    }
}

/// What changes at the change point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Scenario {
    MeanShift {
        before: f64,
        after: f64,
        std: f64,
    },
    VarianceShift {
        mean: f64,
        std_before: f64,
        std_after: f64,
    },
    /// AR(1) process started at zero whose coefficient switches.
    Ar1Shift {
        phi_before: f64,
        phi_after: f64,
        innovation_std: f64,
    },
}

/// Full description of a synthetic series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenSpec {
    pub n: usize,
    /// First index generated under the post-change regime.
    pub change_at: usize,
    pub scenario: Scenario,
    pub noise: Noise,
}

impl GenSpec {
    /// Change placed at `n / 2`.
    pub fn new(n: usize, scenario: Scenario, noise: Noise) -> Self {
        GenSpec { n, change_at: n / 2, scenario, noise }
    }

    fn validate(&self) -> Result<()> {
        if self.n < MIN_SERIES_LEN {
            return Err(invalid("series needs at least nine points"));
        }
        if self.change_at == 0 || self.change_at >= self.n {
            return Err(invalid("change point must lie strictly inside the series"));
        }
        let ok = match self.scenario {
            Scenario::MeanShift { before, after, std } => before.is_finite() && after.is_finite() && std > 0.0,
            Scenario::VarianceShift { mean, std_before, std_after } => {
                mean.is_finite() && std_before > 0.0 && std_after > 0.0
            }
            Scenario::Ar1Shift { phi_before, phi_after, innovation_std } => {
                phi_before.abs() < 1.0 && phi_after.abs() < 1.0 && innovation_std > 0.0
            }
        };
        if !ok {
            return Err(invalid("scenario parameters out of range"));
        }
        Ok(())
    }
}

/// Draws the series for `spec`; the same seed always gives the same values.
/// Bounds are taken from the generated range.
pub fn gen_series(spec: &GenSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.n);
    let mut state = 0.0;
    for t in 0..spec.n {
        let after = t >= spec.change_at;
        let z = spec.noise.sample_unit(&mut rng);
        let v = match spec.scenario {
            Scenario::MeanShift { before, after: shifted, std } => (if after { shifted } else { before }) + std * z,
            Scenario::VarianceShift { mean, std_before, std_after } => {
                mean + (if after { std_after } else { std_before }) * z
            }
            Scenario::Ar1Shift { phi_before, phi_after, innovation_std } => {
                let phi = if after { phi_after } else { phi_before };
                state = phi * state + innovation_std * z;
                state
            }
        };
        values.push(v);
    }
    TimeSeries::with_data_bounds(values, "synthetic")
}
