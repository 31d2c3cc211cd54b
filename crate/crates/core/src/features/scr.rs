use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureParams};

/// Peaks closer than this are merged into the larger one.
pub const MERGE_DISTANCE_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrEvent {
    pub onset_s: f64,
    pub peak_s: f64,
    /// Trough-to-peak rise.
    pub amplitude: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    onset: usize,
    peak: usize,
    onset_value: f64,
    peak_value: f64,
}

impl Candidate {
    fn rise(&self) -> f64 {
        self.peak_value - self.onset_value
    }
}

/// Local maxima of the phasic series with a preceding rise of at least
/// `scr_min_amplitude`, onset at the preceding local minimum.
pub fn detect_scrs(phasic: &[f64], sample_rate: f64, params: &FeatureParams) -> Vec<ScrEvent> {
    let n = phasic.len();
    let mut found: Vec<Candidate> = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if phasic[i] > phasic[i - 1] {
            // climb a plateau to its far edge before deciding
            let mut j = i;
            while j + 1 < n && phasic[j + 1] == phasic[i] {
                j += 1;
            }
            if j + 1 < n && phasic[j + 1] < phasic[i] {
                let mut k = i;
                while k > 0 && phasic[k - 1] < phasic[k] {
                    k -= 1;
                }
                let c = Candidate {
                    onset: k,
                    peak: i,
                    onset_value: phasic[k],
                    peak_value: phasic[i],
                };
                if c.rise() >= params.scr_min_amplitude {
                    found.push(c);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let min_gap = MERGE_DISTANCE_S * sample_rate;
    let mut merged: Vec<Candidate> = Vec::with_capacity(found.len());
    for c in found {
        match merged.last_mut() {
            Some(last) if ((c.peak - last.peak) as f64) < min_gap => {
                let onset = if last.onset_value <= c.onset_value { (last.onset, last.onset_value) } else { (c.onset, c.onset_value) };
                if c.peak_value > last.peak_value {
                    last.peak = c.peak;
                    last.peak_value = c.peak_value;
                }
                (last.onset, last.onset_value) = onset;
            }
            _ => merged.push(c),
        }
    }
    merged
        .into_iter()
        .map(|c| ScrEvent {
            onset_s: c.onset as f64 / sample_rate,
            peak_s: c.peak as f64 / sample_rate,
            amplitude: c.rise(),
        })
        .collect()
}

/// Responses per minute.
pub fn nsscr(events: &[ScrEvent], duration_s: f64) -> Result<f64, FeatureError> {
    if !(duration_s > 0.0) {
        return Err(FeatureError::ZeroDuration);
    }
    Ok(60.0 * events.len() as f64 / duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bateman(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-t / 2.0).exp() - (-t / 0.7).exp()
        }
    }

    fn pulses(times: &[f64], amp: f64, fs: f64, dur: f64) -> Vec<f64> {
        let peak = bateman((2.0f64 / 0.7).ln() * 1.4 / 1.3);
        (0..(dur * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                times.iter().map(|&s| amp * bateman(t - s) / peak).sum()
            })
            .collect()
    }

    #[test]
    fn zero_signal_has_no_events() {
        assert!(detect_scrs(&[0.0; 500], 10.0, &FeatureParams::default()).is_empty());
    }

    #[test]
    fn five_pulses_found_at_their_onsets() {
        let times = [5.0, 15.0, 25.0, 35.0, 45.0];
        let x = pulses(&times, 0.5, 10.0, 60.0);
        let ev = detect_scrs(&x, 10.0, &FeatureParams::default());
        assert_eq!(ev.len(), 5);
        for (e, t) in ev.iter().zip(times) {
            assert!((e.onset_s - t).abs() <= 0.3, "{e:?} vs {t}");
            assert!(e.peak_s > e.onset_s && e.amplitude > 0.0);
        }
        assert!((nsscr(&ev, 300.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sub_threshold_pulses_ignored() {
        let x = pulses(&[5.0, 15.0, 25.0], 0.005, 10.0, 40.0);
        assert!(detect_scrs(&x, 10.0, &FeatureParams::default()).is_empty());
    }

    #[test]
    fn close_peaks_merge_into_larger() {
        let x = pulses(&[5.0], 0.5, 10.0, 20.0);
        let y = pulses(&[5.6], 0.8, 10.0, 20.0);
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        // a ripple on the rising edge must not split the response
        let mut ripple = s.clone();
        ripple[58] -= 0.05;
        for sig in [&s, &ripple] {
            let ev = detect_scrs(sig, 10.0, &FeatureParams::default());
            assert_eq!(ev.len(), 1, "{ev:?}");
            assert!((ev[0].onset_s - 5.0).abs() <= 0.1);
        }
    }

    #[test]
    fn nsscr_arithmetic() {
        assert_eq!(nsscr(&[], 60.0).unwrap(), 0.0);
        assert_eq!(nsscr(&[], 0.0), Err(FeatureError::ZeroDuration));
    }

    proptest! {
        #[test]
        fn more_pulses_never_fewer_detections(slots in proptest::collection::btree_set(0usize..20, 1..12)) {
            let slots: Vec<usize> = slots.into_iter().collect();
            let params = FeatureParams::default();
            let mut prev = 0;
            for k in 1..=slots.len() {
                let times: Vec<f64> = slots[..k].iter().map(|&s| 2.0 + 6.0 * s as f64).collect();
                let x = pulses(&times, 0.3, 10.0, 130.0);
                let count = detect_scrs(&x, 10.0, &params).len();
                prop_assert!(count >= prev);
                prev = count;
            }
        }
    }
}
