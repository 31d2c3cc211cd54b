//! Rank statistics and event-wise summaries of window features.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::features::WindowFeatureRow;
use crate::ingest::EventLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("need at least {min} observations, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("input has fewer than two distinct values")]
    DegenerateInput,
    #[error("statistic {0} is negative")]
    NegativeStatistic(f64),
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of runs of equal values.
fn tie_sizes(v: &[f64]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.chunk_by(|a, b| a == b).map(<[f64]>::len).collect()
}

/// Regularized upper incomplete gamma `Q(df/2, x/2)`.
pub fn chi2_upper_tail(x: f64, df: u32) -> Result<f64, StatsError> {
    if x < 0.0 || x.is_nan() {
        return Err(StatsError::NegativeStatistic(x));
    }
    if df == 0 {
        return Err(StatsError::TooFewGroups(1));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalResult {
    pub h: f64,
    pub df: u32,
    pub p: f64,
}

/// Tie-corrected Kruskal-Wallis H with a chi-square p-value. When every
/// observation is equal the statistic is 0 and p is 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { got: n, min: 3 });
    }
    let ranks = midranks(&pooled);
    let nf = n as f64;
    let grand = (nf + 1.0) / 2.0;
    let mut start = 0;
    let mut ss = 0.0;
    for g in groups {
        let mean = ranks[start..start + g.len()].iter().sum::<f64>() / g.len() as f64;
        ss += g.len() as f64 * (mean - grand).powi(2);
        start += g.len();
    }
    let df = groups.len() as u32 - 1;
    let ties: f64 = tie_sizes(&pooled)
        .into_iter()
        .map(|t| (t * t * t - t) as f64)
        .sum();
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalResult { h: 0.0, df, p: 1.0 });
    }
    let h = (12.0 / (nf * (nf + 1.0)) * ss / correction).max(0.0);
    Ok(KruskalResult {
        h,
        df,
        p: chi2_upper_tail(h, df)?,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of the midranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewSamples { got: x.len(), min: 3 });
    }
    if tie_sizes(x).len() < 2 || tie_sizes(y).len() < 2 {
        return Err(StatsError::DegenerateInput);
    }
    Ok(pearson(&midranks(x), &midranks(y)))
}

/// Event rows in the order events are tabulated: baseline, prompting, the
/// three stimuli, then the remaining labels.
pub const EVENT_ORDER: [EventLabel; 7] = [
    EventLabel::Baseline,
    EventLabel::Prompting,
    EventLabel::StimulusPristine,
    EventLabel::StimulusPolluted,
    EventLabel::StimulusGenfill,
    EventLabel::Task,
    EventLabel::Survey,
];

/// Feature columns in tabulated order.
pub const SUMMARY_FEATURES: [&str; 4] = ["tvsymp", "edasymp", "edasymp_n", "nsscr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStat {
    pub event: EventLabel,
    pub feature: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std: f64,
}

impl EventStat {
    pub fn single_observation(&self) -> bool {
        self.n == 1
    }

    pub fn display(&self) -> String {
        format!("{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Mean and sample std per (event, feature), for events present in `rows`.
pub fn event_summary(rows: &[WindowFeatureRow], features: &[&str]) -> Vec<EventStat> {
    let mut out = Vec::new();
    for event in EVENT_ORDER {
        let group: Vec<&WindowFeatureRow> = rows.iter().filter(|r| r.label == event).collect();
        if group.is_empty() {
            continue;
        }
        for &f in features {
            let v: Vec<f64> = group.iter().filter_map(|r| r.value(f)).collect();
            if v.is_empty() {
                continue;
            }
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            out.push(EventStat {
                event,
                feature: f.to_string(),
                n,
                mean,
                std,
            });
        }
    }
    out
}

/// A named Kruskal comparison between unions of event labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub groups: Vec<Vec<EventLabel>>,
}

impl Comparison {
    /// Parses `NAME=label,label/label[/...]`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let (name, rest) = spec
            .split_once('=')
            .ok_or_else(|| format!("comparison `{spec}` lacks `=`"))?;
        let groups = rest
            .split('/')
            .map(|g| {
                g.split(',')
                    .map(|l| l.trim().parse::<EventLabel>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if groups.len() < 2 {
            return Err(format!("comparison `{name}` needs at least two groups"));
        }
        Ok(Self {
            name: name.trim().to_string(),
            groups,
        })
    }
}

/// The three standard contrasts: rest against all stimuli, the real polluted
/// image against the generative-filled one, and pristine against polluted.
pub fn default_comparisons() -> Vec<Comparison> {
    use EventLabel::*;
    vec![
        Comparison {
            name: "Rest vs. Affective Stimuli".into(),
            groups: vec![vec![Baseline], vec![StimulusPristine, StimulusPolluted, StimulusGenfill]],
        },
        Comparison {
            name: "Real Image vs. AI Generated Affective Stimuli".into(),
            groups: vec![vec![StimulusPolluted], vec![StimulusGenfill]],
        },
        Comparison {
            name: "Calming (Pristine) vs. Distressing (Polluted) Stimuli".into(),
            groups: vec![vec![StimulusPristine], vec![StimulusPolluted, StimulusGenfill]],
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub name: String,
    pub feature: String,
    pub n: usize,
    pub result: KruskalResult,
}

pub fn run_comparison(
    rows: &[WindowFeatureRow],
    cmp: &Comparison,
    feature: &str,
) -> Result<ComparisonResult, StatsError> {
    let groups: Vec<Vec<f64>> = cmp
        .groups
        .iter()
        .map(|labels| {
            rows.iter()
                .filter(|r| labels.contains(&r.label))
                .filter_map(|r| r.value(feature))
                .collect()
        })
        .collect();
    let result = kruskal_wallis(&groups)?;
    Ok(ComparisonResult {
        name: cmp.name.clone(),
        feature: feature.to_string(),
        n: groups.iter().map(Vec::len).sum(),
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub domain: String,
    pub feature: String,
    pub n: usize,
    pub rho: f64,
}

/// Spearman rho of each feature against each SAM domain, over rows with SAM.
/// Pairs with too few or constant observations are left out.
pub fn sam_correlations(rows: &[WindowFeatureRow], features: &[&str]) -> Vec<SpearmanResult> {
    let mut out = Vec::new();
    for domain in ["valence", "arousal", "dominance"] {
        for &f in features {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|r| Some((r.value(f)?, r.value(domain)?)))
                .unzip();
            if let Ok(rho) = spearman_rho(&x, &y) {
                out.push(SpearmanResult {
                    domain: domain.to_string(),
                    feature: f.to_string(),
                    n: x.len(),
                    rho,
                });
            }
        }
    }
    out
}

pub const STATS_REPORT_HEADER: [&str; 11] = [
    "section", "label", "feature", "n", "mean", "std", "mean_pm_std", "h", "df", "p", "rho",
];

/// `stats_report.csv`: summary rows, then Kruskal rows, then Spearman rows.
pub fn write_stats_report<W: Write>(
    summary: &[EventStat],
    comparisons: &[ComparisonResult],
    correlations: &[SpearmanResult],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_REPORT_HEADER)?;
    let blank = String::new;
    for s in summary {
        w.write_record([
            "summary".to_string(),
            s.event.to_string(),
            s.feature.clone(),
            s.n.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            s.display(),
            blank(),
            blank(),
            blank(),
            blank(),
        ])?;
    }
    for c in comparisons {
        w.write_record([
            "kruskal".to_string(),
            c.name.clone(),
            c.feature.clone(),
            c.n.to_string(),
            blank(),
            blank(),
            blank(),
            c.result.h.to_string(),
            c.result.df.to_string(),
            c.result.p.to_string(),
            blank(),
        ])?;
    }
    for s in correlations {
        w.write_record([
            "spearman".to_string(),
            s.domain.clone(),
            s.feature.clone(),
            s.n.to_string(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            s.rho.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed `stats_report.csv` rows keyed by section, for report rendering.
pub fn read_stats_report(text: &str) -> Result<BTreeMap<String, Vec<csv::StringRecord>>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out: BTreeMap<String, Vec<csv::StringRecord>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        out.entry(rec[0].to_string()).or_default().push(rec);
    }
    Ok(out)
}
