use std::f64::consts::PI;

use crate::dsp::{design_butterworth, standardize, zero_phase_filter, DspError, FilterKind};

use super::{FeatureError, FeatureParams, SPECTRAL_RATE};

const LOWPASS_ORDER: usize = 4;

/// Instantaneous amplitude of one demodulation band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAmplitude {
    pub centre: f64,
    pub amplitude: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvSymp {
    pub series: Vec<f64>,
    pub window_mean: f64,
}

/// Four settling lengths of the band lowpass.
pub fn cdm_min_len(params: &FeatureParams) -> usize {
    let settle = (SPECTRAL_RATE / (params.cdm_bandwidth / 2.0)).ceil() as usize;
    4 * settle
}

/// Band centres are `k * bandwidth` for `k = 1..=cdm_num_bands`.
pub fn cdm_decompose(x: &[f64], params: &FeatureParams) -> Result<Vec<BandAmplitude>, FeatureError> {
    params.validate()?;
    let min = cdm_min_len(params);
    if x.len() < min {
        return Err(FeatureError::TooShort { len: x.len(), min });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteInput.into());
    }
    let lp = design_butterworth(
        FilterKind::Lowpass,
        params.cdm_bandwidth / 2.0,
        LOWPASS_ORDER,
        SPECTRAL_RATE,
    )?;
    (1..=params.cdm_num_bands)
        .map(|k| {
            let centre = k as f64 * params.cdm_bandwidth;
            let w = 2.0 * PI * centre / SPECTRAL_RATE;
            let (re, im): (Vec<f64>, Vec<f64>) = x
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let ph = w * i as f64;
                    (v * ph.cos(), -v * ph.sin())
                })
                .unzip();
            let re = zero_phase_filter(&lp, &re)?;
            let im = zero_phase_filter(&lp, &im)?;
            let amplitude = re.iter().zip(&im).map(|(a, b)| 2.0 * a.hypot(*b)).collect();
            Ok(BandAmplitude { centre, amplitude })
        })
        .collect()
}

/// Summed amplitude of the bands centred inside `tvsymp_band`, computed on the
/// unit-variance input. A constant input gives zero.
pub fn tvsymp(x: &[f64], params: &FeatureParams) -> Result<TvSymp, FeatureError> {
    let min = cdm_min_len(params);
    if x.len() < min {
        return Err(FeatureError::TooShort { len: x.len(), min });
    }
    let z = match standardize(x) {
        Ok(z) => z,
        Err(DspError::DegenerateInput) => {
            return Ok(TvSymp {
                series: vec![0.0; x.len()],
                window_mean: 0.0,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let (lo, hi) = params.tvsymp_band;
    let mut series = vec![0.0; x.len()];
    for band in cdm_decompose(&z, params)? {
        if band.centre >= lo && band.centre <= hi {
            for (s, a) in series.iter_mut().zip(&band.amplitude) {
                *s += a;
            }
        }
    }
    let window_mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(TvSymp { series, window_mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tone(f: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / SPECTRAL_RATE + 0.3).sin())
            .collect()
    }

    fn interior(v: &[f64]) -> &[f64] {
        &v[40..v.len() - 40]
    }

    #[test]
    fn centre_tone_lands_in_its_band() {
        let p = FeatureParams::default();
        let bands = cdm_decompose(&tone(0.375, 1.7, 600), &p).unwrap();
        assert_eq!(bands.len(), 8);
        for b in &bands {
            for &a in interior(&b.amplitude) {
                if (b.centre - 0.375).abs() < 1e-12 {
                    assert!((a - 1.7).abs() < 0.02 * 1.7, "{a}");
                } else {
                    assert!(a < 0.05 * 1.7, "band {} amp {a}", b.centre);
                }
            }
        }
    }

    #[test]
    fn zero_input_zero_amplitudes() {
        let bands = cdm_decompose(&[0.0; 300], &FeatureParams::default()).unwrap();
        assert!(bands.iter().all(|b| b.amplitude.iter().all(|&a| a == 0.0)));
        assert_eq!(tvsymp(&[0.0; 300], &FeatureParams::default()).unwrap().window_mean, 0.0);
    }

    #[test]
    fn two_tones_separate() {
        let x: Vec<f64> = tone(0.25, 1.0, 800)
            .iter()
            .zip(tone(0.625, 0.4, 800))
            .map(|(a, b)| a + b)
            .collect();
        let bands = cdm_decompose(&x, &FeatureParams::default()).unwrap();
        let mean = |c: f64| {
            let b = bands.iter().find(|b| (b.centre - c).abs() < 1e-12).unwrap();
            let v = interior(&b.amplitude);
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean(0.25) - 1.0).abs() < 0.05);
        assert!((mean(0.625) - 0.4).abs() < 0.05 * 0.4);
    }

    #[test]
    fn too_short() {
        let p = FeatureParams::default();
        assert_eq!(cdm_min_len(&p), 128);
        assert!(matches!(
            cdm_decompose(&[0.0; 127], &p),
            Err(FeatureError::TooShort { len: 127, min: 128 })
        ));
    }

    #[test]
    fn unit_variance_tone_values() {
        let p = FeatureParams::default();
        let x = tone(0.1, 2f64.sqrt(), 600);
        let v = tvsymp(&x, &p).unwrap().window_mean;
        assert!((v - 2f64.sqrt()).abs() < 0.05 * 2f64.sqrt(), "{v}");
        assert!(tvsymp(&tone(0.5, 2f64.sqrt(), 600), &p).unwrap().window_mean < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scale_invariant(c in 1e-3f64..1e3, seed in 0u64..1000) {
            let x: Vec<f64> = (0..256)
                .map(|i| ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0 + (i as f64 * 0.4).sin())
                .collect();
            let p = FeatureParams::default();
            let a = tvsymp(&x, &p).unwrap().window_mean;
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let b = tvsymp(&scaled, &p).unwrap().window_mean;
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }
}
