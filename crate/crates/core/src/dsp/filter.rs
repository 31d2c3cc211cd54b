//! Butterworth design as cascaded second-order sections, and forward-backward
//! (zero-phase) application.
//!
//! Analog prototype poles are paired into conjugate biquads and mapped to the
//! z-plane with a pre-warped bilinear transform, so the -3 dB point lands
//! exactly on the requested cutoff. Orders of 32 and above stay well
//! conditioned because no section ever sees more than two poles.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Poles strictly inside the unit circle (Jury conditions for order 2).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Direct-form-II-transposed state reached after an infinitely long
    /// unit-step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub cutoff: f64,
    pub order: usize,
    pub sample_rate: f64,
    pub sections: Vec<Biquad>,
}

impl FilterSpec {
    /// Complex response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = 2.0 * PI * freq / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    pub fn gain_db(&self, freq: f64) -> f64 {
        20.0 * self.gain(freq).log10()
    }

    /// Single forward pass starting from the steady state of a constant
    /// input equal to `x[0]`.
    pub fn filter_forward(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = x.to_vec();
        let Some(&x0) = x.first() else {
            return buf;
        };
        let mut level = x0;
        for sec in &self.sections {
            let [mut s1, mut s2] = sec.step_state().map(|v| v * level);
            let [b0, b1, b2] = sec.b;
            let [a1, a2] = sec.a;
            for v in buf.iter_mut() {
                let input = *v;
                let y = b0 * input + s1;
                s1 = b1 * input - a1 * y + s2;
                s2 = b2 * input - a2 * y;
                *v = y;
            }
            level *= sec.dc_gain();
        }
        buf
    }

    pub fn min_len(&self) -> usize {
        3 * self.order
    }
}

pub fn design_butterworth(
    kind: FilterKind,
    cutoff: f64,
    order: usize,
    sample_rate: f64,
) -> Result<FilterSpec, DspError> {
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) || !sample_rate.is_finite() {
        return Err(DspError::InvalidCutoff { cutoff, nyquist });
    }
    if order == 0 || order % 2 == 1 {
        return Err(DspError::OddOrder(order));
    }
    let k = (PI * cutoff / sample_rate).tan();
    let k2 = k * k;
    let sections = (0..order / 2)
        .map(|i| {
            // Analog pole pair s^2 + s/q + 1 with 1/q = 2 sin((2i+1)pi/2N).
            let inv_q = 2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin();
            let norm = 1.0 / (1.0 + k * inv_q + k2);
            let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k * inv_q + k2) * norm];
            let b = match kind {
                FilterKind::Lowpass => [k2 * norm, 2.0 * k2 * norm, k2 * norm],
                FilterKind::Highpass => [norm, -2.0 * norm, norm],
            };
            Biquad { b, a }
        })
        .collect::<Vec<_>>();
    debug_assert!(sections.iter().all(Biquad::is_stable));
    Ok(FilterSpec {
        kind,
        cutoff,
        order,
        sample_rate,
        sections,
    })
}

/// Forward-backward filtering with odd-symmetric reflection padding of
/// `3 * order` samples at both ends. Output length equals input length.
pub fn zero_phase_filter(spec: &FilterSpec, x: &[f64]) -> Result<Vec<f64>, DspError> {
    let n = x.len();
    if n < spec.min_len() || n < 2 {
        return Err(DspError::TooShort {
            len: n,
            min: spec.min_len().max(2),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteInput);
    }
    let pad = (3 * spec.order).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let mut y = spec.filter_forward(&ext);
    y.reverse();
    let mut y = spec.filter_forward(&y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}
