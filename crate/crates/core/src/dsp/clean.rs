use serde::{Deserialize, Serialize};

use super::{mean, pop_std, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    /// Linear interpolation between the nearest kept neighbours.
    Interpolate,
    /// Remove flagged samples; the output is shorter than the input.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanParams {
    pub z_threshold: f64,
    pub replacement: Replacement,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self {
            z_threshold: 3.0,
            replacement: Replacement::Interpolate,
        }
    }
}

/// Flags samples whose population z-score exceeds the threshold and
/// replaces or drops them. A constant input is returned untouched.
pub fn zscore_clean(x: &[f64], params: &CleanParams) -> Result<(Vec<f64>, Vec<usize>), DspError> {
    if x.len() < 3 {
        return Err(DspError::TooShort { len: x.len(), min: 3 });
    }
    if !(params.z_threshold > 0.0) {
        return Err(DspError::InvalidThreshold(params.z_threshold));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteInput);
    }
    let m = mean(x);
    let sd = pop_std(x, m);
    if sd == 0.0 {
        return Ok((x.to_vec(), Vec::new()));
    }
    let flagged: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| ((*v - m) / sd).abs() > params.z_threshold)
        .map(|(i, _)| i)
        .collect();
    if flagged.is_empty() {
        return Ok((x.to_vec(), flagged));
    }

    let cleaned = match params.replacement {
        Replacement::Drop => {
            let mut skip = flagged.iter().peekable();
            x.iter()
                .enumerate()
                .filter(|(i, _)| {
                    if skip.peek() == Some(&i) {
                        skip.next();
                        false
                    } else {
                        true
                    }
                })
                .map(|(_, v)| *v)
                .collect()
        }
        Replacement::Interpolate => {
            let mut keep = vec![true; x.len()];
            for &i in &flagged {
                keep[i] = false;
            }
            interpolate_gaps(x, &keep)
        }
    };
    Ok((cleaned, flagged))
}

fn interpolate_gaps(x: &[f64], keep: &[bool]) -> Vec<f64> {
    let mut out = x.to_vec();
    let mut prev: Option<usize> = None;
    let mut i = 0;
    while i < x.len() {
        if keep[i] {
            prev = Some(i);
            i += 1;
            continue;
        }
        let run_start = i;
        while i < x.len() && !keep[i] {
            i += 1;
        }
        let next = (i < x.len()).then_some(i);
        for (j, slot) in out.iter_mut().enumerate().take(i).skip(run_start) {
            *slot = match (prev, next) {
                (Some(a), Some(b)) => {
                    let w = (j - a) as f64 / (b - a) as f64;
                    x[a] + w * (x[b] - x[a])
                }
                (Some(a), None) => x[a],
                (None, Some(b)) => x[b],
                (None, None) => x[j],
            };
        }
    }
    out
}

/// Zero-mean, unit (population) variance rescaling.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>, DspError> {
    if x.is_empty() {
        return Err(DspError::TooShort { len: 0, min: 1 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteInput);
    }
    let m = mean(x);
    let sd = pop_std(x, m);
    if sd == 0.0 {
        return Err(DspError::DegenerateInput);
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_sequence_untouched() {
        let x = vec![2.5; 10];
        let (out, flags) = zscore_clean(&x, &CleanParams::default()).unwrap();
        assert_eq!(out, x);
        assert!(flags.is_empty());
    }

    #[test]
    fn lone_spike_among_24_zeros_is_flagged() {
        let mut x = vec![0.0; 25];
        x[12] = 100.0;
        // mean 4, population std sqrt(384): z = 96 / 19.6 = 4.9
        let z = 96.0 / 384f64.sqrt();
        assert!((z - 4.899).abs() < 1e-3);
        let (out, flags) = zscore_clean(&x, &CleanParams::default()).unwrap();
        assert_eq!(flags, vec![12]);
        assert_eq!(out[12], 0.0);
    }

    #[test]
    fn spike_among_nine_zeros_cannot_exceed_three() {
        let mut x = vec![0.0; 10];
        x[9] = 30.0;
        // largest attainable z for n = 10 is 9 / sqrt(10)
        assert!(9.0 / 10f64.sqrt() < 3.0);
        let (out, flags) = zscore_clean(&x, &CleanParams::default()).unwrap();
        assert!(flags.is_empty());
        assert_eq!(out, x);
    }

    #[test]
    fn interpolation_and_edges() {
        let mut x: Vec<f64> = (0..40).map(|i| (i % 5) as f64).collect();
        x[0] = 500.0;
        x[20] = -500.0;
        let (out, flags) = zscore_clean(&x, &CleanParams::default()).unwrap();
        assert_eq!(flags, vec![0, 20]);
        assert_eq!(out[0], x[1]);
        assert_eq!(out[20], (x[19] + x[21]) / 2.0);
        let dropped = zscore_clean(
            &x,
            &CleanParams {
                replacement: Replacement::Drop,
                ..Default::default()
            },
        )
        .unwrap()
        .0;
        assert_eq!(dropped.len(), 38);
    }

    #[test]
    fn too_short_and_non_finite() {
        assert!(matches!(
            zscore_clean(&[1.0, 2.0], &CleanParams::default()),
            Err(DspError::TooShort { .. })
        ));
        assert!(matches!(
            zscore_clean(&[1.0, f64::NAN, 2.0], &CleanParams::default()),
            Err(DspError::NonFiniteInput)
        ));
    }

    #[test]
    fn standardize_basics() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        let m = mean(&z);
        let v = z.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
        assert!(matches!(standardize(&[4.0; 5]), Err(DspError::DegenerateInput)));
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(x in prop::collection::vec(-1e3f64..1e3, 3..200)) {
            prop_assume!(pop_std(&x, mean(&x)) > 1e-6);
            let once = standardize(&x).unwrap();
            let twice = standardize(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let m = mean(&once);
            prop_assert!(m.abs() < 1e-9);
            let v = once.iter().map(|a| (a - m).powi(2)).sum::<f64>() / once.len() as f64;
            prop_assert!((v - 1.0).abs() < 1e-9);
        }

        #[test]
        fn cleaning_stays_within_kept_range(
            x in prop::collection::vec(-50.0f64..50.0, 3..120),
            spikes in prop::collection::vec((0usize..120, -1e4f64..1e4), 0..4),
            thr in 1.0f64..4.0,
        ) {
            let mut x = x;
            for (i, v) in spikes {
                let n = x.len();
                x[i % n] = v;
            }
            let params = CleanParams { z_threshold: thr, replacement: Replacement::Interpolate };
            let (out, flags) = zscore_clean(&x, &params).unwrap();
            prop_assert_eq!(out.len(), x.len());
            let kept: Vec<f64> = x.iter().enumerate()
                .filter(|(i, _)| !flags.contains(i)).map(|(_, v)| *v).collect();
            if !kept.is_empty() {
                let lo = kept.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for v in &out {
                    prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }
        }
    }
}
