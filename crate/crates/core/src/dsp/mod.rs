//! Outlier cleaning, normalization, IIR filtering and resampling.

mod clean;
mod filter;
mod resample;

pub use clean::{standardize, zscore_clean, CleanParams, Replacement};
pub use filter::{
    design_butterworth, zero_phase_filter, Biquad, FilterKind, FilterSpec,
};
pub use resample::{decimate, ANTI_ALIAS_ORDER};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("filter order {0} must be even and positive")]
    OddOrder(usize),
    #[error("input of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("input has zero variance")]
    DegenerateInput,
    #[error("cannot resample {from} Hz to {to} Hz by an integer factor")]
    RateMismatch { from: f64, to: f64 },
    #[error("z threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub(crate) fn pop_std(x: &[f64], mean: f64) -> f64 {
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}
