//! Synthetic sessions with known ground truth.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    write_eda_csv, write_env_csv, write_events_csv, write_reports_csv, write_sam_csv, EnvChannel,
    EnvTrace, Event, EventLabel, EventTimeline, RawEdaTrace, SamResponse, SelfReport,
};

/// Bateman time constants of generated responses, seconds.
pub const SYNTH_TAU0: f64 = 2.0;
pub const SYNTH_TAU1: f64 = 0.7;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A sinusoid confined to `[start_s, end_s)` with 5 s raised-cosine edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub start_s: f64,
    pub end_s: f64,
    pub freq: f64,
    pub amplitude: f64,
}

const TAPER_S: f64 = 5.0;

impl Oscillation {
    fn at(&self, t: f64) -> f64 {
        if t < self.start_s || t >= self.end_s {
            return 0.0;
        }
        let edge = (t - self.start_s).min(self.end_s - t);
        let env = if edge < TAPER_S {
            0.5 - 0.5 * (PI * edge / TAPER_S).cos()
        } else {
            1.0
        };
        self.amplitude * env * (2.0 * PI * self.freq * (t - self.start_s)).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub start_ms: i64,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub tonic_level: f64,
    /// µS per minute.
    pub tonic_drift: f64,
    pub scr_times: Vec<f64>,
    pub scr_amplitudes: Vec<f64>,
    pub noise_std: f64,
    pub oscillations: Vec<Oscillation>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            start_ms: 0,
            duration_s: 120.0,
            sample_rate: 10.0,
            tonic_level: 2.0,
            tonic_drift: 0.0,
            scr_times: Vec::new(),
            scr_amplitudes: Vec::new(),
            noise_std: 0.0,
            oscillations: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.duration_s > 0.0 && self.sample_rate > 0.0) {
            return bad("duration and sample rate must be positive".into());
        }
        if self.scr_times.len() != self.scr_amplitudes.len() {
            return bad(format!(
                "{} SCR times but {} amplitudes",
                self.scr_times.len(),
                self.scr_amplitudes.len()
            ));
        }
        if let Some(t) = self.scr_times.iter().find(|t| !(0.0..=self.duration_s).contains(*t)) {
            return bad(format!("SCR time {t} outside [0, {}]", self.duration_s));
        }
        if let Some(a) = self.scr_amplitudes.iter().find(|a| !(**a > 0.0)) {
            return bad(format!("SCR amplitude {a} must be positive"));
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueScr {
    pub time_s: f64,
    pub amplitude: f64,
}

/// Components whose sum is the generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tonic: Vec<f64>,
    pub phasic: Vec<f64>,
    pub oscillation: Vec<f64>,
    pub noise: Vec<f64>,
    pub scrs: Vec<TrueScr>,
}

fn bateman(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-t / SYNTH_TAU0).exp() - (-t / SYNTH_TAU1).exp()
    }
}

/// Trace = tonic + phasic + oscillation + noise, elementwise in that order.
pub fn gen_eda(spec: &SynthSpec) -> Result<(RawEdaTrace, GroundTruth), SynthError> {
    spec.validate()?;
    let fs = spec.sample_rate;
    let n = (spec.duration_s * fs).round() as usize;
    let time = |i: usize| i as f64 / fs;
    let tonic: Vec<f64> = (0..n)
        .map(|i| spec.tonic_level + spec.tonic_drift * time(i) / 60.0)
        .collect();
    let mut phasic = vec![0.0; n];
    for (&t0, &amp) in spec.scr_times.iter().zip(&spec.scr_amplitudes) {
        let first = ((t0 * fs).floor() as usize).min(n);
        let kernel: Vec<f64> = (first..n).map(|i| bateman(time(i) - t0)).collect();
        let peak = kernel.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            for (p, k) in phasic[first..].iter_mut().zip(&kernel) {
                *p += amp * k / peak;
            }
        }
    }
    let oscillation: Vec<f64> = (0..n)
        .map(|i| spec.oscillations.iter().map(|o| o.at(time(i))).sum())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<f64> = if spec.noise_std > 0.0 {
        let d = Normal::new(0.0, spec.noise_std).expect("valid std");
        (0..n).map(|_| d.sample(&mut rng)).collect()
    } else {
        vec![0.0; n]
    };
    let samples = (0..n)
        .map(|i| tonic[i] + phasic[i] + oscillation[i] + noise[i])
        .collect();
    let scrs = spec
        .scr_times
        .iter()
        .zip(&spec.scr_amplitudes)
        .map(|(&time_s, &amplitude)| TrueScr { time_s, amplitude })
        .collect();
    Ok((
        RawEdaTrace::new(spec.start_ms, fs, samples),
        GroundTruth {
            tonic,
            phasic,
            oscillation,
            noise,
            scrs,
        },
    ))
}

/// Which environment channel drives the in-band oscillation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Co2SuppressesFeature,
    IrRaisesFeature,
    None,
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "co2" | "co2_suppresses_feature" => Ok(Relation::Co2SuppressesFeature),
            "ir" | "ir_raises_feature" => Ok(Relation::IrRaisesFeature),
            "none" => Ok(Relation::None),
            other => Err(format!("unknown relation `{other}` (co2, ir, none)")),
        }
    }
}

pub const SESSION_START_MS: i64 = 1_700_000_000_000;
pub const SESSION_RATE: f64 = 10.0;
pub const BASELINE_S: f64 = 30.0;
pub const TASK_S: f64 = 120.0;
/// Frequency of the planted in-band oscillation.
pub const OSCILLATION_HZ: f64 = 0.12;
const SCR_AMPLITUDE: (f64, f64) = (0.2, 0.5);
const NOISE_STD: f64 = 0.005;

/// Planted values for one task window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowTruth {
    pub event_id: u32,
    pub co2_ppm: f64,
    pub ir: f64,
    pub oscillation_amplitude: f64,
    pub scr_per_min: f64,
    /// Arousal proxy in [0, 1] used to derive SAM and self reports.
    pub arousal_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTruth {
    pub relation: Relation,
    pub seed: u64,
    /// Sign of the planted association between the driving channel and
    /// TVSymp: -1, +1, or 0 for no relation.
    pub direction: i8,
    pub driving_channel: Option<String>,
    pub windows: Vec<WindowTruth>,
    pub scrs: Vec<TrueScr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionBundle {
    pub eda: RawEdaTrace,
    pub env: EnvTrace,
    pub timeline: EventTimeline,
    pub sam: Vec<SamResponse>,
    pub reports: Vec<SelfReport>,
    pub truth: SessionTruth,
}

/// Plausible indoor ranges per channel, in `EnvChannel` order.
const ENV_RANGES: [(f64, f64); 8] = [
    (35.0, 70.0),     // noise_db
    (0.0, 1000.0),    // ir
    (5.0, 80.0),      // dust
    (400.0, 2000.0),  // co2_ppm
    (20.0, 35.0),     // temp_c
    (30.0, 70.0),     // rh_pct
    (1000.0, 1025.0), // pressure
    (0.0, 2.0),       // wind
];

/// Oscillation to phasic RMS ratio. Chosen so that the standardized band
/// amplitude, about sqrt(2 (r^2 + f) / (r^2 + 1)) with `f` the in-band
/// share of response power, rises roughly linearly with `drive`.
fn oscillation_ratio(drive: f64) -> f64 {
    const RESPONSE_IN_BAND: f64 = 0.38;
    let target = 1.0 + 0.38 * drive.clamp(0.0, 1.0);
    let s = target * target / 2.0;
    ((s - RESPONSE_IN_BAND) / (1.0 - s)).sqrt()
}

fn to_scale(v: f64, lo: u8, hi: u8) -> u8 {
    let span = (hi - lo) as f64;
    (lo as f64 + (v.clamp(0.0, 1.0) * span).round()) as u8
}

/// `n_windows` pairs of a 30 s baseline and a 120 s task window. Each task
/// window has its own environment draw; the amplitude of a 0.12 Hz
/// oscillation follows `relation`.
pub fn gen_session(n_windows: usize, relation: Relation, seed: u64) -> Result<SessionBundle, SynthError> {
    if n_windows < 2 {
        return Err(SynthError::InvalidSpec(format!("need at least 2 windows, got {n_windows}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let block = BASELINE_S + TASK_S;
    let duration = block * n_windows as f64;

    let mut events = Vec::new();
    let mut windows = Vec::new();
    let mut scr_times = Vec::new();
    let mut scr_amps = Vec::new();
    let mut oscillations = Vec::new();
    let mut env_levels = Vec::new();
    let mut sam = Vec::new();
    let mut reports = Vec::new();

    for w in 0..n_windows {
        let t0 = block * w as f64;
        let task_start = t0 + BASELINE_S;
        let base_id = 2 * w as u32 + 1;
        let task_id = base_id + 1;
        let ms = |s: f64| SESSION_START_MS + (s * 1000.0).round() as i64;
        events.push(Event {
            event_id: base_id,
            start_ms: ms(t0),
            end_ms: ms(task_start),
            label: EventLabel::Baseline,
        });
        events.push(Event {
            event_id: task_id,
            start_ms: ms(task_start),
            end_ms: ms(task_start + TASK_S),
            label: EventLabel::Task,
        });

        let mut levels = [0.0; 8];
        for (l, (lo, hi)) in levels.iter_mut().zip(ENV_RANGES) {
            *l = rng.random_range(lo..hi);
        }
        let co2 = levels[EnvChannel::Co2Ppm.index()];
        let ir = levels[EnvChannel::Ir.index()];
        let drive = match relation {
            Relation::Co2SuppressesFeature => (2000.0 - co2) / 1600.0,
            Relation::IrRaisesFeature => ir / 1000.0,
            Relation::None => rng.random::<f64>(),
        };
        // relative to the window's phasic spread; rescaled once the responses exist
        let ratio = oscillation_ratio(drive) * (1.0 + 0.05 * jitter.sample(&mut rng)).max(0.5);
        oscillations.push(Oscillation {
            start_s: task_start,
            end_s: task_start + TASK_S,
            freq: OSCILLATION_HZ,
            amplitude: ratio,
        });

        // one response in the baseline, 2-8 per minute in the task
        scr_times.push(t0 + 8.0 + 10.0 * rng.random::<f64>());
        scr_amps.push(rng.random_range(SCR_AMPLITUDE.0..SCR_AMPLITUDE.1));
        let per_min = rng.random_range(2.0..8.0f64);
        let count = (per_min * TASK_S / 60.0).round() as usize;
        let spacing = TASK_S / count as f64;
        for k in 0..count {
            let t = task_start + spacing * (k as f64 + 0.5) + 0.8 * spacing * (rng.random::<f64>() - 0.5);
            scr_times.push(t);
            scr_amps.push(rng.random_range(SCR_AMPLITUDE.0..SCR_AMPLITUDE.1));
        }

        let proxy = ((count as f64 * 60.0 / TASK_S - 2.0) / 6.0 + 0.1 * jitter.sample(&mut rng)).clamp(0.0, 1.0);
        let arousal = to_scale(proxy, 1, 9);
        let valence = to_scale(1.0 - proxy + 0.1 * jitter.sample(&mut rng), 1, 9);
        let dominance = to_scale(0.5 - 0.4 * (proxy - 0.5) + 0.1 * jitter.sample(&mut rng), 1, 9);
        sam.push(SamResponse::new(task_id, valence, arousal, dominance).expect("ratings in range"));
        reports.push(
            SelfReport::new(task_id, to_scale(proxy, 1, 10), to_scale(proxy, 1, 7)).expect("report in range"),
        );
        env_levels.push(levels);
        windows.push(WindowTruth {
            event_id: task_id,
            co2_ppm: co2,
            ir,
            oscillation_amplitude: 0.0,
            scr_per_min: count as f64 * 60.0 / TASK_S,
            arousal_proxy: proxy,
        });
    }

    let mut spec = SynthSpec {
        start_ms: SESSION_START_MS,
        duration_s: duration,
        sample_rate: SESSION_RATE,
        tonic_level: 4.0,
        tonic_drift: 0.05,
        scr_times,
        scr_amplitudes: scr_amps,
        noise_std: NOISE_STD,
        oscillations: Vec::new(),
        seed: rng.random(),
    };
    // oscillation power = ratio^2 times the window's phasic variance, so the
    // in-band share follows the drive instead of the response count
    let (_, dry) = gen_eda(&spec)?;
    for (o, truth) in oscillations.iter_mut().zip(windows.iter_mut()) {
        let a = (o.start_s * SESSION_RATE).round() as usize;
        let b = ((o.end_s * SESSION_RATE).round() as usize).min(dry.phasic.len());
        let seg = &dry.phasic[a..b];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let sd = (seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / seg.len() as f64).sqrt();
        o.amplitude *= std::f64::consts::SQRT_2 * sd;
        truth.oscillation_amplitude = o.amplitude;
    }
    spec.oscillations = oscillations;
    let (eda, gt) = gen_eda(&spec)?;

    // environment at 1 Hz, per-window level plus small sensor noise
    let n_env = duration as usize;
    let mut channels: [Vec<f64>; 8] = Default::default();
    let times_ms: Vec<i64> = (0..n_env).map(|s| SESSION_START_MS + 1000 * s as i64).collect();
    for s in 0..n_env {
        let w = ((s as f64) / block) as usize;
        for (c, series) in channels.iter_mut().enumerate() {
            let (lo, hi) = ENV_RANGES[c];
            let v = env_levels[w.min(n_windows - 1)][c] + 0.002 * (hi - lo) * jitter.sample(&mut rng);
            series.push(v);
        }
    }
    let env = EnvTrace {
        start_ms: SESSION_START_MS,
        sample_rate: 1.0,
        times_ms,
        channels,
        gaps: Vec::new(),
    };
    let (direction, driving_channel) = match relation {
        Relation::Co2SuppressesFeature => (-1, Some(EnvChannel::Co2Ppm.column().to_string())),
        Relation::IrRaisesFeature => (1, Some(EnvChannel::Ir.column().to_string())),
        Relation::None => (0, None),
    };
    Ok(SessionBundle {
        eda,
        env,
        timeline: EventTimeline::new(events).map_err(SynthError::InvalidSpec)?,
        sam,
        reports,
        truth: SessionTruth {
            relation,
            seed,
            direction,
            driving_channel,
            windows,
            scrs: gt.scrs,
        },
    })
}

/// File names written by [`write_session`].
pub const SESSION_FILES: [&str; 6] = [
    "eda.csv",
    "env.csv",
    "events.csv",
    "sam.csv",
    "reports.csv",
    "ground_truth.json",
];

pub fn write_session(bundle: &SessionBundle, dir: &Path) -> Result<(), SynthError> {
    let io = |name: &str| {
        let path = dir.join(name).display().to_string();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(""))?;
    let mut buf = Vec::new();
    write_eda_csv(&bundle.eda, &mut buf).map_err(io("eda.csv"))?;
    let files: [(&str, Vec<u8>); 6] = [
        ("eda.csv", std::mem::take(&mut buf)),
        ("env.csv", {
            write_env_csv(&bundle.env, &mut buf).map_err(io("env.csv"))?;
            std::mem::take(&mut buf)
        }),
        ("events.csv", {
            write_events_csv(&bundle.timeline, &mut buf).map_err(io("events.csv"))?;
            std::mem::take(&mut buf)
        }),
        ("sam.csv", {
            write_sam_csv(&bundle.sam, &mut buf).map_err(io("sam.csv"))?;
            std::mem::take(&mut buf)
        }),
        ("reports.csv", {
            write_reports_csv(&bundle.reports, &mut buf).map_err(io("reports.csv"))?;
            std::mem::take(&mut buf)
        }),
        ("ground_truth.json", {
            let mut s = serde_json::to_string_pretty(&bundle.truth).expect("truth serializes");
            s.push('\n');
            s.into_bytes()
        }),
    ];
    for (name, bytes) in files {
        crate::atomic_write(&dir.join(name), &bytes).map_err(io(name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tonic_only_is_exact_ramp() {
        let spec = SynthSpec {
            tonic_drift: 0.6,
            ..SynthSpec::default()
        };
        let (trace, gt) = gen_eda(&spec).unwrap();
        assert_eq!(trace.len(), 1200);
        for (i, v) in trace.samples.iter().enumerate() {
            assert_eq!(*v, 2.0 + 0.6 * (i as f64 / 10.0) / 60.0);
        }
        assert!(gt.phasic.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn single_response_peak_equals_amplitude() {
        let spec = SynthSpec {
            scr_times: vec![10.03],
            scr_amplitudes: vec![1.0],
            ..SynthSpec::default()
        };
        let (trace, gt) = gen_eda(&spec).unwrap();
        let (imax, _) = trace
            .samples
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        assert!((trace.samples[imax] - gt.tonic[imax] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn components_sum_and_determinism() {
        let spec = SynthSpec {
            scr_times: vec![5.0, 40.0],
            scr_amplitudes: vec![0.4, 0.7],
            noise_std: 0.02,
            seed: 9,
            ..SynthSpec::default()
        };
        let (a, gt) = gen_eda(&spec).unwrap();
        let (b, _) = gen_eda(&spec).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            assert_eq!(a.samples[i], gt.tonic[i] + gt.phasic[i] + gt.oscillation[i] + gt.noise[i]);
        }
        let other = gen_eda(&SynthSpec { seed: 10, ..spec }).unwrap().0;
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec { scr_times: vec![500.0], scr_amplitudes: vec![1.0], ..SynthSpec::default() },
            SynthSpec { scr_times: vec![5.0], scr_amplitudes: vec![-1.0], ..SynthSpec::default() },
            SynthSpec { noise_std: -0.1, ..SynthSpec::default() },
            SynthSpec { scr_times: vec![5.0], ..SynthSpec::default() },
        ];
        for s in bad {
            assert!(matches!(gen_eda(&s), Err(SynthError::InvalidSpec(_))));
        }
    }

    #[test]
    fn session_layout() {
        let s = gen_session(8, Relation::Co2SuppressesFeature, 7).unwrap();
        let tasks = s.timeline.events().iter().filter(|e| e.label == EventLabel::Task).count();
        let bases = s.timeline.events().iter().filter(|e| e.label == EventLabel::Baseline).count();
        assert_eq!((tasks, bases), (8, 8));
        assert_eq!(s.sam.len(), 8);
        assert_eq!(s.eda.len(), 8 * 1500);
        assert_eq!(s.env.len(), 8 * 150);
        assert_eq!(gen_session(8, Relation::Co2SuppressesFeature, 7).unwrap(), s);
        assert!(gen_session(1, Relation::None, 7).is_err());
        // planted amplitude falls with CO2
        let mut w = s.truth.windows.clone();
        w.sort_by(|a, b| a.co2_ppm.total_cmp(&b.co2_ppm));
        let co2: Vec<f64> = w.iter().map(|w| w.co2_ppm).collect();
        let amp: Vec<f64> = w.iter().map(|w| w.oscillation_amplitude).collect();
        assert!(crate::stats::spearman_rho(&co2, &amp).unwrap() <= -0.8);
    }
}
