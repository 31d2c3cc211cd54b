//! Session file parsing, validation and labeling.
//!
//! A session directory holds `eda.csv`, `env.csv`, `events.csv` and,
//! optionally, `sam.csv` and `reports.csv`. All files are UTF-8, comma
//! separated, with `.` as the decimal point and integer UTC millisecond
//! timestamps.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment gaps longer than this are reported.
pub const ENV_GAP_MS: i64 = 5_000;

pub const EDA_HEADER: [&str; 2] = ["unix_ms", "eda_us"];
pub const EVENTS_HEADER: [&str; 4] = ["event_id", "start_ms", "end_ms", "label"];
pub const SAM_HEADER: [&str; 4] = ["event_id", "valence", "arousal", "dominance"];
pub const REPORTS_HEADER: [&str; 3] = ["window_id", "difficulty", "stress"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: no data rows")]
    EmptyFile { path: String },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: String,
        line: u64,
        reason: String,
    },
    #[error("{path}:{line}: timestamp {t_ms} precedes previous row")]
    NonMonotonicTime { path: String, line: u64, t_ms: i64 },
    #[error("{path}: missing column `{column}`")]
    MissingChannel { path: String, column: String },
    #[error("{path}: cannot infer a sample rate (need two distinct timestamps)")]
    UnresolvableRate { path: String },
    #[error("{path}: {reason}")]
    InvalidTimeline { path: String, reason: String },
    #[error("event {event_id} [{start_ms}, {end_ms}) is not covered by the {stream} recording")]
    PartialCoverage {
        event_id: u32,
        start_ms: i64,
        end_ms: i64,
        stream: &'static str,
    },
    #[error("event {event_id} holds {samples} EDA samples (need at least 2)")]
    EmptyWindow { event_id: u32, samples: usize },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Timestamped skin conductance samples in microsiemens.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEdaTrace {
    pub start_ms: i64,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl RawEdaTrace {
    pub fn new(start_ms: i64, sample_rate: f64, samples: Vec<f64>) -> Self {
        assert!(sample_rate > 0.0, "sample rate must be positive");
        Self {
            start_ms,
            sample_rate,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }

    pub fn time_ms(&self, index: usize) -> i64 {
        self.start_ms + (index as f64 * self.period_ms()).round() as i64
    }

    /// End of the covered span (exclusive).
    pub fn end_ms(&self) -> i64 {
        self.start_ms + (self.samples.len() as f64 * self.period_ms()).round() as i64
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// First sample index whose timestamp is at or after `t_ms`.
    fn index_at_or_after(&self, t_ms: i64) -> usize {
        let offset = (t_ms - self.start_ms) as f64 / self.period_ms();
        let idx = (offset - 1e-9).ceil().max(0.0) as usize;
        idx.min(self.samples.len())
    }

    /// Sub-trace covering `[start_ms, end_ms)`.
    pub fn clip(&self, start_ms: i64, end_ms: i64) -> RawEdaTrace {
        let i0 = self.index_at_or_after(start_ms);
        let i1 = self.index_at_or_after(end_ms).max(i0);
        RawEdaTrace {
            start_ms: self.time_ms(i0),
            sample_rate: self.sample_rate,
            samples: self.samples[i0..i1].to_vec(),
        }
    }
}

/// The eight microclimate channels, in file column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvChannel {
    NoiseDb,
    Ir,
    Dust,
    Co2Ppm,
    TempC,
    RhPct,
    Pressure,
    Wind,
}

impl EnvChannel {
    pub const ALL: [EnvChannel; 8] = [
        EnvChannel::NoiseDb,
        EnvChannel::Ir,
        EnvChannel::Dust,
        EnvChannel::Co2Ppm,
        EnvChannel::TempC,
        EnvChannel::RhPct,
        EnvChannel::Pressure,
        EnvChannel::Wind,
    ];

    pub fn column(self) -> &'static str {
        match self {
            EnvChannel::NoiseDb => "noise_db",
            EnvChannel::Ir => "ir",
            EnvChannel::Dust => "dust",
            EnvChannel::Co2Ppm => "co2_ppm",
            EnvChannel::TempC => "temp_c",
            EnvChannel::RhPct => "rh_pct",
            EnvChannel::Pressure => "pressure",
            EnvChannel::Wind => "wind",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.column() == name)
    }
}

/// A stretch of more than [`ENV_GAP_MS`] without environment samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvGap {
    pub after_ms: i64,
    pub before_ms: i64,
}

impl EnvGap {
    pub fn length_ms(&self) -> i64 {
        self.before_ms - self.after_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvTrace {
    pub start_ms: i64,
    pub sample_rate: f64,
    pub times_ms: Vec<i64>,
    /// One series per [`EnvChannel`], indexed by `EnvChannel::index`.
    pub channels: [Vec<f64>; 8],
    pub gaps: Vec<EnvGap>,
}

impl EnvTrace {
    pub fn len(&self) -> usize {
        self.times_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ms.is_empty()
    }

    pub fn channel(&self, ch: EnvChannel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn end_ms(&self) -> i64 {
        match self.times_ms.last() {
            Some(&t) => t + (1000.0 / self.sample_rate).round() as i64,
            None => self.start_ms,
        }
    }

    /// Per-channel arithmetic mean over samples timed in `[start_ms, end_ms)`.
    pub fn mean_over(&self, start_ms: i64, end_ms: i64) -> Option<EnvAggregate> {
        let lo = self.times_ms.partition_point(|&t| t < start_ms);
        let hi = self.times_ms.partition_point(|&t| t < end_ms);
        if hi <= lo {
            return None;
        }
        let n = (hi - lo) as f64;
        let mut values = [0.0; 8];
        for (slot, series) in values.iter_mut().zip(&self.channels) {
            *slot = series[lo..hi].iter().sum::<f64>() / n;
        }
        Some(EnvAggregate(values))
    }
}

/// Window-level environment values, indexed by `EnvChannel::index`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvAggregate(pub [f64; 8]);

impl EnvAggregate {
    pub fn get(&self, ch: EnvChannel) -> f64 {
        self.0[ch.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLabel {
    Baseline,
    Task,
    Survey,
    StimulusPristine,
    StimulusPolluted,
    StimulusGenfill,
    Prompting,
}

impl EventLabel {
    pub const ALL: [EventLabel; 7] = [
        EventLabel::Baseline,
        EventLabel::Task,
        EventLabel::Survey,
        EventLabel::StimulusPristine,
        EventLabel::StimulusPolluted,
        EventLabel::StimulusGenfill,
        EventLabel::Prompting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::Baseline => "baseline",
            EventLabel::Task => "task",
            EventLabel::Survey => "survey",
            EventLabel::StimulusPristine => "stimulus_pristine",
            EventLabel::StimulusPolluted => "stimulus_polluted",
            EventLabel::StimulusGenfill => "stimulus_genfill",
            EventLabel::Prompting => "prompting",
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown event label `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: u32,
    pub start_ms: i64,
    pub end_ms: i64,
    pub label: EventLabel,
}

impl Event {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

/// Validated, time-sorted list of non-overlapping events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventTimeline {
    events: Vec<Event>,
}

impl EventTimeline {
    pub fn new(mut events: Vec<Event>) -> Result<Self, String> {
        let mut ids = HashSet::new();
        for e in &events {
            if e.end_ms <= e.start_ms {
                return Err(format!("event {} ends before it starts", e.event_id));
            }
            if !ids.insert(e.event_id) {
                return Err(format!("duplicate event id {}", e.event_id));
            }
        }
        events.sort_by_key(|e| (e.start_ms, e.event_id));
        for pair in events.windows(2) {
            if pair[1].start_ms < pair[0].end_ms {
                return Err(format!(
                    "events {} and {} overlap",
                    pair[0].event_id, pair[1].event_id
                ));
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn get(&self, event_id: u32) -> Option<&Event> {
        self.events.iter().find(|e| e.event_id == event_id)
    }
}

/// Self-Assessment Manikin ratings for one event, each on a 1-9 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamResponse {
    pub event_id: u32,
    pub valence: u8,
    pub arousal: u8,
    pub dominance: u8,
}

impl SamResponse {
    pub fn new(event_id: u32, valence: u8, arousal: u8, dominance: u8) -> Result<Self, String> {
        for (name, v) in [
            ("valence", valence),
            ("arousal", arousal),
            ("dominance", dominance),
        ] {
            if !(1..=9).contains(&v) {
                return Err(format!("{name} rating {v} outside 1..=9"));
            }
        }
        Ok(Self {
            event_id,
            valence,
            arousal,
            dominance,
        })
    }
}

/// Per-window self report: task difficulty (1-10) and stress (1-7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfReport {
    pub window_id: u32,
    pub difficulty: u8,
    pub stress: u8,
}

impl SelfReport {
    pub fn new(window_id: u32, difficulty: u8, stress: u8) -> Result<Self, String> {
        if !(1..=10).contains(&difficulty) {
            return Err(format!("difficulty {difficulty} outside 1..=10"));
        }
        if !(1..=7).contains(&stress) {
            return Err(format!("stress {stress} outside 1..=7"));
        }
        Ok(Self {
            window_id,
            difficulty,
            stress,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressLabel {
    High,
    Low,
    Unlabeled,
}

impl StressLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StressLabel::High => "high",
            StressLabel::Low => "low",
            StressLabel::Unlabeled => "unlabeled",
        }
    }
}

impl FromStr for StressLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(StressLabel::High),
            "low" => Ok(StressLabel::Low),
            "unlabeled" => Ok(StressLabel::Unlabeled),
            other => Err(format!("unknown stress label `{other}`")),
        }
    }
}

/// High when difficulty > 6 and stress > 4; low when both are below 3.
pub fn label_stress(report: &SelfReport) -> StressLabel {
    if report.difficulty > 6 && report.stress > 4 {
        StressLabel::High
    } else if report.difficulty < 3 && report.stress < 3 {
        StressLabel::Low
    } else {
        StressLabel::Unlabeled
    }
}

/// One event's slice of the session.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWindow {
    pub event_id: u32,
    pub label: EventLabel,
    pub start_ms: i64,
    pub end_ms: i64,
    pub eda: RawEdaTrace,
    pub env: EnvAggregate,
}

impl AlignedWindow {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }
}

pub fn window_align(
    eda: &RawEdaTrace,
    env: &EnvTrace,
    timeline: &EventTimeline,
) -> Result<Vec<AlignedWindow>, IngestError> {
    timeline
        .events()
        .iter()
        .map(|event| align_event(eda, env, event))
        .collect()
}

pub fn align_event(
    eda: &RawEdaTrace,
    env: &EnvTrace,
    event: &Event,
) -> Result<AlignedWindow, IngestError> {
    let coverage = |stream| IngestError::PartialCoverage {
        event_id: event.event_id,
        start_ms: event.start_ms,
        end_ms: event.end_ms,
        stream,
    };
    if event.start_ms < eda.start_ms || event.end_ms > eda.end_ms() {
        return Err(coverage("EDA"));
    }
    if env.is_empty() || event.start_ms < env.start_ms || event.end_ms > env.end_ms() {
        return Err(coverage("environment"));
    }
    let sub = eda.clip(event.start_ms, event.end_ms);
    if sub.len() < 2 {
        return Err(IngestError::EmptyWindow {
            event_id: event.event_id,
            samples: sub.len(),
        });
    }
    let env_mean = env
        .mean_over(event.start_ms, event.end_ms)
        .ok_or_else(|| coverage("environment"))?;
    Ok(AlignedWindow {
        event_id: event.event_id,
        label: event.label,
        start_ms: event.start_ms,
        end_ms: event.end_ms,
        eda: sub,
        env: env_mean,
    })
}

// ---------------------------------------------------------------------------
// Parsing

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path_str(path),
        source,
    })?;
    Ok(reader_from(file))
}

fn reader_from<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn csv_err(path: &str, source: csv::Error) -> IngestError {
    IngestError::Csv {
        path: path.to_owned(),
        source,
    }
}

fn malformed(path: &str, line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        path: path.to_owned(),
        line,
        reason: reason.into(),
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn field<'r>(
    path: &str,
    record: &'r csv::StringRecord,
    idx: usize,
) -> Result<&'r str, IngestError> {
    record
        .get(idx)
        .ok_or_else(|| malformed(path, record_line(record), format!("missing field {}", idx + 1)))
}

fn parse_num<T: FromStr>(
    path: &str,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T, IngestError> {
    let raw = field(path, record, idx)?;
    raw.parse::<T>().map_err(|_| {
        malformed(
            path,
            record_line(record),
            format!("`{raw}` is not a valid {name}"),
        )
    })
}

fn parse_finite(
    path: &str,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<f64, IngestError> {
    let v: f64 = parse_num(path, record, idx, name)?;
    if !v.is_finite() {
        return Err(malformed(
            path,
            record_line(record),
            format!("{name} is not finite"),
        ));
    }
    Ok(v)
}

fn expect_header(
    path: &str,
    headers: &csv::StringRecord,
    expected: &[&str],
) -> Result<(), IngestError> {
    for col in expected {
        if !headers.iter().any(|h| h == *col) {
            return Err(IngestError::MissingChannel {
                path: path.to_owned(),
                column: (*col).to_owned(),
            });
        }
    }
    Ok(())
}

fn column_index(headers: &csv::StringRecord, name: &str) -> usize {
    headers
        .iter()
        .position(|h| h == name)
        .expect("header checked beforehand")
}

/// Sample rate from the median positive gap between timestamps.
fn infer_rate(path: &str, times: &[i64]) -> Result<f64, IngestError> {
    let mut gaps: Vec<i64> = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0)
        .collect();
    if gaps.is_empty() {
        return Err(IngestError::UnresolvableRate {
            path: path.to_owned(),
        });
    }
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 0 {
        (gaps[mid - 1] + gaps[mid]) as f64 / 2.0
    } else {
        gaps[mid] as f64
    };
    Ok(1000.0 / median)
}

pub fn parse_eda_csv(path: &Path) -> Result<RawEdaTrace, IngestError> {
    read_eda(open_reader(path)?, &path_str(path))
}

pub fn read_eda<R: Read>(mut rdr: csv::Reader<R>, path: &str) -> Result<RawEdaTrace, IngestError> {
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &headers, &EDA_HEADER)?;
    let (ti, vi) = (
        column_index(&headers, "unix_ms"),
        column_index(&headers, "eda_us"),
    );
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let t: i64 = parse_num(path, &record, ti, "timestamp")?;
        let v = parse_finite(path, &record, vi, "conductance")?;
        if v < 0.0 {
            return Err(malformed(
                path,
                record_line(&record),
                format!("negative conductance {v}"),
            ));
        }
        if let Some(&prev) = times.last() {
            if t < prev {
                return Err(IngestError::NonMonotonicTime {
                    path: path.to_owned(),
                    line: record_line(&record),
                    t_ms: t,
                });
            }
        }
        times.push(t);
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_owned(),
        });
    }
    let sample_rate = infer_rate(path, &times)?;
    Ok(RawEdaTrace {
        start_ms: times[0],
        sample_rate,
        samples,
    })
}

pub fn parse_env_csv(path: &Path) -> Result<EnvTrace, IngestError> {
    read_env(open_reader(path)?, &path_str(path))
}

pub fn read_env<R: Read>(mut rdr: csv::Reader<R>, path: &str) -> Result<EnvTrace, IngestError> {
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &headers, &["unix_ms"])?;
    let cols: Vec<&str> = EnvChannel::ALL.iter().map(|c| c.column()).collect();
    expect_header(path, &headers, &cols)?;
    let ti = column_index(&headers, "unix_ms");
    let idx: Vec<usize> = cols.iter().map(|c| column_index(&headers, c)).collect();

    let mut times: Vec<i64> = Vec::new();
    let mut channels: [Vec<f64>; 8] = Default::default();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let t: i64 = parse_num(path, &record, ti, "timestamp")?;
        if let Some(&prev) = times.last() {
            if t < prev {
                return Err(IngestError::NonMonotonicTime {
                    path: path.to_owned(),
                    line: record_line(&record),
                    t_ms: t,
                });
            }
        }
        for (series, (&ci, name)) in channels.iter_mut().zip(idx.iter().zip(&cols)) {
            series.push(parse_finite(path, &record, ci, name)?);
        }
        times.push(t);
    }
    if times.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_owned(),
        });
    }
    let sample_rate = infer_rate(path, &times)?;
    let gaps = times
        .windows(2)
        .filter(|w| w[1] - w[0] > ENV_GAP_MS)
        .map(|w| EnvGap {
            after_ms: w[0],
            before_ms: w[1],
        })
        .collect();
    Ok(EnvTrace {
        start_ms: times[0],
        sample_rate,
        times_ms: times,
        channels,
        gaps,
    })
}

pub fn parse_events_csv(path: &Path) -> Result<EventTimeline, IngestError> {
    read_events(open_reader(path)?, &path_str(path))
}

pub fn read_events<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<EventTimeline, IngestError> {
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &headers, &EVENTS_HEADER)?;
    let idx: Vec<usize> = EVENTS_HEADER
        .iter()
        .map(|c| column_index(&headers, c))
        .collect();
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let label_raw = field(path, &record, idx[3])?;
        let label = label_raw
            .parse::<EventLabel>()
            .map_err(|reason| malformed(path, record_line(&record), reason))?;
        events.push(Event {
            event_id: parse_num(path, &record, idx[0], "event id")?,
            start_ms: parse_num(path, &record, idx[1], "timestamp")?,
            end_ms: parse_num(path, &record, idx[2], "timestamp")?,
            label,
        });
    }
    if events.is_empty() {
        return Err(IngestError::EmptyFile {
            path: path.to_owned(),
        });
    }
    EventTimeline::new(events).map_err(|reason| IngestError::InvalidTimeline {
        path: path.to_owned(),
        reason,
    })
}

pub fn parse_sam_csv(path: &Path) -> Result<Vec<SamResponse>, IngestError> {
    let p = path_str(path);
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(&p, e))?.clone();
    expect_header(&p, &headers, &SAM_HEADER)?;
    let idx: Vec<usize> = SAM_HEADER.iter().map(|c| column_index(&headers, c)).collect();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(&p, e))?;
        let sam = SamResponse::new(
            parse_num(&p, &record, idx[0], "event id")?,
            parse_num(&p, &record, idx[1], "rating")?,
            parse_num(&p, &record, idx[2], "rating")?,
            parse_num(&p, &record, idx[3], "rating")?,
        )
        .map_err(|reason| malformed(&p, record_line(&record), reason))?;
        out.push(sam);
    }
    Ok(out)
}

pub fn parse_reports_csv(path: &Path) -> Result<Vec<SelfReport>, IngestError> {
    let p = path_str(path);
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(&p, e))?.clone();
    expect_header(&p, &headers, &REPORTS_HEADER)?;
    let idx: Vec<usize> = REPORTS_HEADER
        .iter()
        .map(|c| column_index(&headers, c))
        .collect();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(&p, e))?;
        let report = SelfReport::new(
            parse_num(&p, &record, idx[0], "window id")?,
            parse_num(&p, &record, idx[1], "difficulty")?,
            parse_num(&p, &record, idx[2], "stress")?,
        )
        .map_err(|reason| malformed(&p, record_line(&record), reason))?;
        out.push(report);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Writing

pub fn write_eda_csv<W: Write>(trace: &RawEdaTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", EDA_HEADER.join(","))?;
    for (i, v) in trace.samples.iter().enumerate() {
        writeln!(out, "{},{}", trace.time_ms(i), v)?;
    }
    Ok(())
}

pub fn write_env_csv<W: Write>(trace: &EnvTrace, mut out: W) -> std::io::Result<()> {
    let cols: Vec<&str> = EnvChannel::ALL.iter().map(|c| c.column()).collect();
    writeln!(out, "unix_ms,{}", cols.join(","))?;
    for (i, t) in trace.times_ms.iter().enumerate() {
        write!(out, "{t}")?;
        for series in &trace.channels {
            write!(out, ",{}", series[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(timeline: &EventTimeline, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", EVENTS_HEADER.join(","))?;
    for e in timeline.events() {
        writeln!(out, "{},{},{},{}", e.event_id, e.start_ms, e.end_ms, e.label)?;
    }
    Ok(())
}

pub fn write_sam_csv<W: Write>(rows: &[SamResponse], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", SAM_HEADER.join(","))?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.event_id, r.valence, r.arousal, r.dominance)?;
    }
    Ok(())
}

pub fn write_reports_csv<W: Write>(rows: &[SelfReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", REPORTS_HEADER.join(","))?;
    for r in rows {
        writeln!(out, "{},{},{}", r.window_id, r.difficulty, r.stress)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eda_from(text: &str) -> Result<RawEdaTrace, IngestError> {
        read_eda(reader_from(text.as_bytes()), "eda.csv")
    }

    fn env_from(text: &str) -> Result<EnvTrace, IngestError> {
        read_env(reader_from(text.as_bytes()), "env.csv")
    }

    const ENV_HEADER: &str = "unix_ms,noise_db,ir,dust,co2_ppm,temp_c,rh_pct,pressure,wind";

    #[test]
    fn header_only_eda_is_empty() {
        assert!(matches!(
            eda_from("unix_ms,eda_us\n"),
            Err(IngestError::EmptyFile { .. })
        ));
    }

    #[test]
    fn two_rows_at_100ms_give_10hz() {
        let trace = eda_from("unix_ms,eda_us\n0,1.0\n100,1.1\n").unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.sample_rate, 10.0);
        assert_eq!(trace.samples, vec![1.0, 1.1]);
    }

    #[test]
    fn negative_conductance_is_malformed() {
        assert!(matches!(
            eda_from("unix_ms,eda_us\n0,1.0\n100,-0.5\n"),
            Err(IngestError::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn bad_number_and_backwards_time() {
        assert!(matches!(
            eda_from("unix_ms,eda_us\n0,abc\n"),
            Err(IngestError::MalformedRow { .. })
        ));
        assert!(matches!(
            eda_from("unix_ms,eda_us\n100,1\n0,1\n"),
            Err(IngestError::NonMonotonicTime { t_ms: 0, .. })
        ));
    }

    #[test]
    fn env_missing_co2_column() {
        let text = "unix_ms,noise_db,ir,dust,temp_c,rh_pct,pressure,wind\n0,1,1,1,1,1,1,1\n";
        match env_from(text) {
            Err(IngestError::MissingChannel { column, .. }) => assert_eq!(column, "co2_ppm"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn env_rate_and_gap_report() {
        let trace = env_from(&format!(
            "{ENV_HEADER}\n0,1,2,3,4,5,6,7,8\n1000,1,2,3,4,5,6,7,8\n2000,1,2,3,4,5,6,7,8\n"
        ))
        .unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.sample_rate, 1.0);
        assert!(trace.gaps.is_empty());
        assert_eq!(trace.channel(EnvChannel::Co2Ppm), &[4.0, 4.0, 4.0]);

        let gappy = env_from(&format!(
            "{ENV_HEADER}\n0,1,2,3,4,5,6,7,8\n10000,1,2,3,4,5,6,7,8\n"
        ))
        .unwrap();
        assert_eq!(gappy.gaps.len(), 1);
        assert_eq!(gappy.gaps[0].length_ms(), 10_000);
    }

    #[test]
    fn stress_rule() {
        let label = |d, s| label_stress(&SelfReport::new(1, d, s).unwrap());
        assert_eq!(label(7, 5), StressLabel::High);
        assert_eq!(label(2, 2), StressLabel::Low);
        assert_eq!(label(5, 4), StressLabel::Unlabeled);
        assert_eq!(label(6, 5), StressLabel::Unlabeled);
        assert_eq!(label(7, 4), StressLabel::Unlabeled);
        assert_eq!(label(2, 3), StressLabel::Unlabeled);
    }

    #[test]
    fn stress_label_is_order_consistent() {
        let rank = |l: StressLabel| match l {
            StressLabel::Low => 0,
            StressLabel::Unlabeled => 1,
            StressLabel::High => 2,
        };
        for d in 1..=10u8 {
            for s in 1..=7u8 {
                let base = label_stress(&SelfReport::new(0, d, s).unwrap());
                if d < 10 {
                    let up = label_stress(&SelfReport::new(0, d + 1, s).unwrap());
                    assert!(!(base == StressLabel::High && up == StressLabel::Low));
                    assert!(rank(up) >= rank(base) || base == StressLabel::Low);
                }
                if s < 7 {
                    let up = label_stress(&SelfReport::new(0, d, s + 1).unwrap());
                    assert!(!(base == StressLabel::High && up == StressLabel::Low));
                }
            }
        }
    }

    #[test]
    fn rating_bounds() {
        assert!(SamResponse::new(1, 0, 5, 5).is_err());
        assert!(SamResponse::new(1, 9, 1, 5).is_ok());
        assert!(SelfReport::new(1, 11, 3).is_err());
        assert!(SelfReport::new(1, 3, 8).is_err());
    }

    #[test]
    fn timeline_validation() {
        let ev = |id, s, e| Event {
            event_id: id,
            start_ms: s,
            end_ms: e,
            label: EventLabel::Task,
        };
        assert!(EventTimeline::new(vec![ev(1, 0, 10), ev(2, 10, 20)]).is_ok());
        assert!(EventTimeline::new(vec![ev(1, 0, 10), ev(2, 5, 20)]).is_err());
        assert!(EventTimeline::new(vec![ev(1, 0, 10), ev(1, 10, 20)]).is_err());
        assert!(EventTimeline::new(vec![ev(1, 10, 10)]).is_err());
        let tl = EventTimeline::new(vec![ev(2, 10, 20), ev(1, 0, 10)]).unwrap();
        assert_eq!(tl.events()[0].event_id, 1);
    }

    fn flat_env(start_ms: i64, seconds: usize, co2: f64) -> EnvTrace {
        let times: Vec<i64> = (0..seconds).map(|i| start_ms + 1000 * i as i64).collect();
        let mut channels: [Vec<f64>; 8] = Default::default();
        for (k, series) in channels.iter_mut().enumerate() {
            *series = vec![if k == EnvChannel::Co2Ppm.index() { co2 } else { k as f64 }; seconds];
        }
        EnvTrace {
            start_ms,
            sample_rate: 1.0,
            times_ms: times,
            channels,
            gaps: vec![],
        }
    }

    #[test]
    fn align_sixty_seconds() {
        let eda = RawEdaTrace::new(0, 10.0, (0..1200).map(|i| i as f64 * 0.001).collect());
        let env = flat_env(0, 120, 400.0);
        let tl = EventTimeline::new(vec![Event {
            event_id: 7,
            start_ms: 30_000,
            end_ms: 90_000,
            label: EventLabel::Baseline,
        }])
        .unwrap();
        let windows = window_align(&eda, &env, &tl).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].eda.len(), 600);
        assert_eq!(windows[0].eda.start_ms, 30_000);
        assert_eq!(windows[0].env.get(EnvChannel::Co2Ppm), 400.0);
    }

    #[test]
    fn align_rejects_uncovered_event() {
        let eda = RawEdaTrace::new(0, 10.0, vec![1.0; 100]);
        let env = flat_env(0, 10, 400.0);
        let tl = EventTimeline::new(vec![Event {
            event_id: 1,
            start_ms: 5_000,
            end_ms: 20_000,
            label: EventLabel::Task,
        }])
        .unwrap();
        assert!(matches!(
            window_align(&eda, &env, &tl),
            Err(IngestError::PartialCoverage { .. })
        ));
    }

    #[test]
    fn adjacent_windows_conserve_samples() {
        let eda = RawEdaTrace::new(1_000, 10.0, (0..1000).map(|i| i as f64).collect());
        let env = flat_env(1_000, 100, 500.0);
        let tl = EventTimeline::new(vec![
            Event { event_id: 1, start_ms: 2_050, end_ms: 30_000, label: EventLabel::Baseline },
            Event { event_id: 2, start_ms: 30_000, end_ms: 44_420, label: EventLabel::Task },
            Event { event_id: 3, start_ms: 44_420, end_ms: 90_000, label: EventLabel::Survey },
        ])
        .unwrap();
        let windows = window_align(&eda, &env, &tl).unwrap();
        let joined: Vec<f64> = windows.iter().flat_map(|w| w.eda.samples.clone()).collect();
        assert_eq!(joined, eda.clip(2_050, 90_000).samples);
    }

    #[test]
    fn eda_round_trip() {
        let trace = RawEdaTrace::new(1_700_000_000_000, 10.0, vec![0.123456789, 2.5, 10.0]);
        let mut buf = Vec::new();
        write_eda_csv(&trace, &mut buf).unwrap();
        let back = read_eda(reader_from(buf.as_slice()), "mem").unwrap();
        assert_eq!(back, trace);
    }
}
