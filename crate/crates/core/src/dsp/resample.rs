use super::filter::{design_butterworth, zero_phase_filter, FilterKind};
use super::DspError;

/// Order of the anti-alias Butterworth stage applied before downsampling.
pub const ANTI_ALIAS_ORDER: usize = 8;

/// Downsample by the integer factor `from_rate / to_rate`, after a zero-phase
/// lowpass at 0.8 of the target Nyquist. Keeps samples 0, factor, 2 factor, ...
pub fn decimate(x: &[f64], from_rate: f64, to_rate: f64) -> Result<Vec<f64>, DspError> {
    let mismatch = DspError::RateMismatch {
        from: from_rate,
        to: to_rate,
    };
    if !(from_rate > 0.0 && to_rate > 0.0) || to_rate > from_rate {
        return Err(mismatch);
    }
    let ratio = from_rate / to_rate;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 * ratio {
        return Err(mismatch);
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(x.to_vec());
    }
    let aa = design_butterworth(
        FilterKind::Lowpass,
        0.8 * to_rate / 2.0,
        ANTI_ALIAS_ORDER,
        from_rate,
    )?;
    let smooth = zero_phase_filter(&aa, x)?;
    Ok(smooth.into_iter().step_by(factor).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn length_and_constant() {
        let out = decimate(&vec![1.25; 100], 10.0, 2.0).unwrap();
        assert_eq!(out.len(), 20);
        for v in out {
            assert!((v - 1.25).abs() < 1e-9);
        }
        assert_eq!(decimate(&vec![0.0; 101], 10.0, 2.0).unwrap().len(), 21);
    }

    #[test]
    fn rate_mismatch() {
        assert!(matches!(
            decimate(&[0.0; 100], 10.0, 3.0),
            Err(DspError::RateMismatch { .. })
        ));
    }

    #[test]
    fn slow_tone_keeps_amplitude() {
        let x = tone(0.1, 10.0, 3000);
        let y = decimate(&x, 10.0, 2.0).unwrap();
        let expected = tone(0.1, 2.0, 600);
        for i in 50..550 {
            assert!((y[i] - expected[i]).abs() < 0.02);
        }
    }

    /// Hann-windowed periodogram power within `band` Hz, normalised by the window energy.
    fn band_power(x: &[f64], fs: f64, band: (f64, f64)) -> f64 {
        let n = x.len();
        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let wss: f64 = w.iter().map(|v| v * v).sum();
        (0..=n / 2)
            .filter(|&k| {
                let f = k as f64 * fs / n as f64;
                f >= band.0 && f <= band.1
            })
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (v, wi)) in x.iter().zip(&w).enumerate() {
                    let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += v * wi * ph.cos();
                    im += v * wi * ph.sin();
                }
                2.0 * (re * re + im * im) / (wss * n as f64)
            })
            .sum()
    }

    #[test]
    fn high_tone_does_not_alias() {
        let x = tone(4.5, 10.0, 3000);
        let y = decimate(&x, 10.0, 2.0).unwrap();
        let p_in = band_power(&x, 10.0, (4.4, 4.6));
        // 4.5 Hz folds onto 0.5 Hz at a 2 Hz rate
        let p_out = band_power(&y, 2.0, (0.4, 0.6));
        let db = 10.0 * (p_out / p_in).log10();
        assert!(db < -60.0, "alias band at {db} dB");
    }
}
