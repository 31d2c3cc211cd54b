use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::DspError;

use super::{FeatureError, FeatureParams, SPECTRAL_RATE};

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
    pub segments: usize,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// Rectangle-rule integral over bins with `lo <= f <= hi`.
    pub fn power_between(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.resolution()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdaSymp {
    pub band_power: f64,
    pub normalized: f64,
}

fn blackman(len: usize) -> Vec<f64> {
    // periodic form, as used for spectral estimation
    (0..len)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / len as f64;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect()
}

/// Averaged periodogram over mean-removed, Blackman-windowed segments.
/// Trailing samples that do not fill a segment are ignored.
pub fn welch_psd(
    x: &[f64],
    sample_rate: f64,
    window_len: usize,
    overlap: usize,
) -> Result<Psd, FeatureError> {
    if window_len < 2 || overlap >= window_len {
        return Err(FeatureError::InvalidParams(format!(
            "segment length {window_len} with overlap {overlap}"
        )));
    }
    if x.len() < window_len {
        return Err(FeatureError::TooShort {
            len: x.len(),
            min: window_len,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteInput.into());
    }
    let step = window_len - overlap;
    let segments = (x.len() - window_len) / step + 1;
    let w = blackman(window_len);
    let scale = 1.0 / (sample_rate * w.iter().map(|v| v * v).sum::<f64>());
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let half = window_len / 2;
    let mut density = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    for s in 0..segments {
        let seg = &x[s * step..s * step + window_len];
        let m = seg.iter().sum::<f64>() / window_len as f64;
        for ((b, v), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex64::new((v - m) * wi, 0.0);
        }
        fft.process(&mut buf);
        for (k, d) in density.iter_mut().enumerate() {
            let mut p = buf[k].norm_sqr() * scale;
            if k != 0 && !(window_len % 2 == 0 && k == half) {
                p *= 2.0;
            }
            *d += p;
        }
    }
    density.iter_mut().for_each(|d| *d /= segments as f64);
    let freqs = (0..=half)
        .map(|k| k as f64 * sample_rate / window_len as f64)
        .collect();
    Ok(Psd {
        freqs,
        density,
        segments,
    })
}

/// Band power in `edasymp_band` and its share of the power in (0, 1] Hz.
pub fn edasymp(x: &[f64], params: &FeatureParams) -> Result<EdaSymp, FeatureError> {
    params.validate()?;
    let psd = welch_psd(x, SPECTRAL_RATE, params.psd_window_len, params.overlap_samples())?;
    let (lo, hi) = params.edasymp_band;
    let band_power = psd.power_between(lo, hi);
    let total = psd.power_between(f64::MIN_POSITIVE, SPECTRAL_RATE / 2.0);
    let normalized = if total > 0.0 {
        (band_power / total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(EdaSymp {
        band_power,
        normalized,
    })
}
