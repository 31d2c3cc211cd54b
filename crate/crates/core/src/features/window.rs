use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cvxeda::Decomposition;
use crate::dsp::{decimate, design_butterworth, zero_phase_filter, FilterKind};
use crate::ingest::{AlignedWindow, EnvAggregate, EnvChannel, EventLabel, SamResponse, StressLabel};

use super::{detect_scrs, edasymp, nsscr, tvsymp, FeatureError, FeatureParams, SPECTRAL_RATE};

/// Shortest window that fits one 128-sample segment at 2 Hz.
pub const MIN_WINDOW_S: f64 = 64.0;

const DETREND_CUTOFF: f64 = 0.01;
const DETREND_ORDER: usize = 8;

pub const FEATURES_HEADER: [&str; 18] = [
    "window_id",
    "label",
    "stress",
    "valence",
    "arousal",
    "dominance",
    "tvsymp",
    "edasymp",
    "edasymp_n",
    "nsscr",
    "noise_db",
    "ir",
    "dust",
    "co2_ppm",
    "temp_c",
    "rh_pct",
    "pressure",
    "wind",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatureRow {
    pub window_id: u32,
    pub label: EventLabel,
    pub tvsymp: f64,
    pub edasymp: f64,
    pub edasymp_n: f64,
    pub nsscr: f64,
    pub env: EnvAggregate,
    pub stress: Option<StressLabel>,
    pub sam: Option<SamResponse>,
}

impl WindowFeatureRow {
    /// Named numeric columns usable as model inputs or targets.
    pub fn value(&self, column: &str) -> Option<f64> {
        match column {
            "tvsymp" => Some(self.tvsymp),
            "edasymp" => Some(self.edasymp),
            "edasymp_n" => Some(self.edasymp_n),
            "nsscr" => Some(self.nsscr),
            "valence" => self.sam.map(|s| s.valence as f64),
            "arousal" => self.sam.map(|s| s.arousal as f64),
            "dominance" => self.sam.map(|s| s.dominance as f64),
            "stress" => match self.stress? {
                StressLabel::High => Some(1.0),
                StressLabel::Low => Some(0.0),
                StressLabel::Unlabeled => None,
            },
            other => EnvChannel::from_column(other).map(|c| self.env.get(c)),
        }
    }
}

/// NSSCR from the phasic component; TVSymp and EDASymp from the window's
/// signal decimated to 2 Hz and high-passed at 0.01 Hz.
pub fn extract_window_features(
    window: &AlignedWindow,
    decomposition: &Decomposition,
    params: &FeatureParams,
) -> Result<WindowFeatureRow, FeatureError> {
    params.validate()?;
    let fs = window.eda.sample_rate;
    let min = (MIN_WINDOW_S * fs).ceil() as usize;
    if window.eda.len() < min {
        return Err(FeatureError::TooShort {
            len: window.eda.len(),
            min,
        });
    }
    let duration = decomposition.len() as f64 / decomposition.sample_rate;
    let events = detect_scrs(&decomposition.phasic, decomposition.sample_rate, params);
    let rate = nsscr(&events, duration)?;

    let slow = decimate(&window.eda.samples, fs, SPECTRAL_RATE)?;
    let hp = design_butterworth(FilterKind::Highpass, DETREND_CUTOFF, DETREND_ORDER, SPECTRAL_RATE)?;
    let slow = zero_phase_filter(&hp, &slow)?;
    let tv = tvsymp(&slow, params)?;
    let eda = edasymp(&slow, params)?;
    Ok(WindowFeatureRow {
        window_id: window.event_id,
        label: window.label,
        tvsymp: tv.window_mean,
        edasymp: eda.band_power,
        edasymp_n: eda.normalized,
        nsscr: rate,
        env: window.env,
        stress: None,
        sam: None,
    })
}

pub fn write_features_csv<W: Write>(rows: &[WindowFeatureRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURES_HEADER)?;
    for r in rows {
        let opt = |v: Option<u8>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut rec = vec![
            r.window_id.to_string(),
            r.label.to_string(),
            r.stress.map(|s| s.as_str().to_string()).unwrap_or_default(),
            opt(r.sam.map(|s| s.valence)),
            opt(r.sam.map(|s| s.arousal)),
            opt(r.sam.map(|s| s.dominance)),
            r.tvsymp.to_string(),
            r.edasymp.to_string(),
            r.edasymp_n.to_string(),
            r.nsscr.to_string(),
        ];
        rec.extend(r.env.0.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<WindowFeatureRow>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(FEATURES_HEADER) {
        return Err(format!("unexpected features header: {}", header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| e.to_string())?;
        let err = |col: &str, e: &dyn std::fmt::Display| format!("line {line}, column {col}: {e}");
        let num = |j: usize| -> Result<f64, String> {
            rec[j].parse::<f64>().map_err(|e| err(FEATURES_HEADER[j], &e))
        };
        let window_id = rec[0].parse::<u32>().map_err(|e| err("window_id", &e))?;
        let label = rec[1].parse::<EventLabel>().map_err(|e| err("label", &e))?;
        let stress = match &rec[2] {
            "" => None,
            s => Some(s.parse::<StressLabel>().map_err(|e| err("stress", &e))?),
        };
        let sam = if rec[3].is_empty() {
            None
        } else {
            let r = |j: usize| rec[j].parse::<u8>().map_err(|e| err(FEATURES_HEADER[j], &e));
            Some(SamResponse::new(window_id, r(3)?, r(4)?, r(5)?).map_err(|e| err("sam", &e))?)
        };
        let mut env = [0.0; 8];
        for (k, v) in env.iter_mut().enumerate() {
            *v = num(10 + k)?;
        }
        rows.push(WindowFeatureRow {
            window_id,
            label,
            tvsymp: num(6)?,
            edasymp: num(7)?,
            edasymp_n: num(8)?,
            nsscr: num(9)?,
            env: EnvAggregate(env),
            stress,
            sam,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvxeda::{decompose, CvxEdaParams};
    use crate::ingest::RawEdaTrace;
    use std::f64::consts::PI;

    fn window(samples: Vec<f64>) -> AlignedWindow {
        let n = samples.len() as i64;
        AlignedWindow {
            event_id: 3,
            label: EventLabel::Baseline,
            start_ms: 0,
            end_ms: n * 100,
            eda: RawEdaTrace::new(0, 10.0, samples),
            env: EnvAggregate([1.0, 2.0, 3.0, 800.0, 25.0, 50.0, 1013.0, 0.5]),
        }
    }

    #[test]
    fn short_window_rejected() {
        let w = window(vec![1.0; 600]);
        let d = decompose(&w.eda.samples, 10.0, &CvxEdaParams::default()).unwrap();
        assert!(matches!(
            extract_window_features(&w, &d, &FeatureParams::default()),
            Err(FeatureError::TooShort { .. })
        ));
    }

    #[test]
    fn periodic_responses_and_oscillation() {
        let fs = 10.0;
        let h = |t: f64| if t > 0.0 { (-t / 2.0).exp() - (-t / 0.7).exp() } else { 0.0 };
        let peak = h((2.0f64 / 0.7).ln() * 1.4 / 1.3);
        // 5 responses per minute over 120 s plus a 0.12 Hz oscillation below the response threshold
        let y: Vec<f64> = (0..1200)
            .map(|i| {
                let t = i as f64 / fs;
                let scr: f64 = (0..10).map(|k| 0.5 * h(t - 3.0 - 12.0 * k as f64) / peak).sum();
                2.0 + scr + 0.004 * (2.0 * PI * 0.12 * t).sin()
            })
            .collect();
        let w = window(y);
        let d = decompose(&w.eda.samples, fs, &CvxEdaParams::default()).unwrap();
        let row = extract_window_features(&w, &d, &FeatureParams::default()).unwrap();
        assert!((row.nsscr - 5.0).abs() <= 0.5, "{}", row.nsscr);
        assert!(row.tvsymp > 0.0);
        assert!((0.0..=1.0).contains(&row.edasymp_n));
    }

    #[test]
    fn flat_baseline() {
        let y: Vec<f64> = (0..900).map(|i| 3.0 + 1e-4 * (i as f64 * 1.3).sin()).collect();
        let w = window(y);
        let d = decompose(&w.eda.samples, 10.0, &CvxEdaParams::default()).unwrap();
        let row = extract_window_features(&w, &d, &FeatureParams::default()).unwrap();
        assert_eq!(row.nsscr, 0.0);
        assert!(row.edasymp_n < 0.1, "{}", row.edasymp_n);
    }

    #[test]
    fn csv_round_trip() {
        let mut row = WindowFeatureRow {
            window_id: 4,
            label: EventLabel::StimulusPolluted,
            tvsymp: 1.25,
            edasymp: 0.0031,
            edasymp_n: 0.6,
            nsscr: 7.5,
            env: EnvAggregate([55.0, 1.0, 12.0, 950.5, 26.1, 48.0, 1012.0, 0.2]),
            stress: Some(StressLabel::High),
            sam: Some(SamResponse::new(4, 3, 7, 5).unwrap()),
        };
        let mut plain = row.clone();
        plain.window_id = 5;
        plain.stress = None;
        plain.sam = None;
        let mut buf = Vec::new();
        write_features_csv(&[row.clone(), plain.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("window_id,label,stress,valence,arousal,dominance,tvsymp,edasymp,edasymp_n,nsscr,noise_db"));
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![row.clone(), plain]);
        row.tvsymp = 0.0;
        assert_eq!(row.value("co2_ppm"), Some(950.5));
        assert_eq!(row.value("arousal"), Some(7.0));
        assert_eq!(row.value("bogus"), None);
    }
}
