//! Change-point detection laid out for SIMD homomorphic evaluation.
//!
//! A series is cut into blocks, one block per row of a square matrix packed
//! into a single ciphertext. Block means, variances or turning rates are
//! computed with rotations, additions and multiplications only; a CUSUM
//! statistic and a polynomial comparator then locate the change.
//!
//! The ciphertexts are emulated by [`backend::EvalContext`], which tracks the
//! multiplicative depth and counts every operation. [`oracle`] holds the exact
//! plaintext reference and [`dp`] the local differential privacy baseline.
//!
//! ```
//! use hecpd::pipeline::{cpd, CpdConfig, TimeSeries};
//! use hecpd::summarize::ChangeType;
//!
//! let values: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
//! let series = TimeSeries::new(values, (0.0, 1.0), "step").unwrap();
//! let cfg = CpdConfig { block_size: Some(10), ..CpdConfig::new(ChangeType::Mean) };
//! let found = cpd(&series, &cfg).unwrap();
//! assert_eq!(found.tau_index, Some(50));
//! ```
#![no_std]
extern crate alloc;

pub mod argmax;
pub mod backend;
pub mod compare;
pub mod cusum;
pub mod datagen;
pub mod dp;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod pipeline;
pub mod summarize;

pub use backend::{CipherVector, ContextParams, EvalContext, OpCounts, PlainVector};
pub use compare::SignParams;
pub use error::{Error, Result};
pub use pipeline::{cpd, ChangePointResult, CpdConfig, TimeSeries};
pub use summarize::ChangeType;
