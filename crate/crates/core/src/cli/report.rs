use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::features::WindowFeatureRow;
use crate::ingest::EventLabel;
use crate::stats::{read_stats_report, EVENT_ORDER, SUMMARY_FEATURES};

use super::analyze::load_features;
use super::svg::{heat_colour, percentile_colour, tick_label, ticks, Svg};
use super::{json_bytes, read_text, write_outputs, CliError};

/// Files the report reads from the run directory.
pub const REPORT_INPUTS: [&str; 5] = [
    "features.csv",
    "metrics.json",
    "shap_points.csv",
    "importance.csv",
    "stats_report.csv",
];

/// Shapley values of one feature, with value percentiles.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureShap {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl FeatureShap {
    pub fn mean_abs(&self) -> f64 {
        self.points.iter().map(|(s, _)| s.abs()).sum::<f64>() / self.points.len().max(1) as f64
    }
}

fn bad(name: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Report(format!("{name}: {e}"))
}

/// Groups `shap_points.csv` by feature, most impactful (mean |φ|) first.
pub fn read_shap_points(text: &str) -> Result<Vec<FeatureShap>, CliError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad("shap_points.csv", e))?.clone();
    if header.iter().ne(["row", "feature", "feature_value", "percentile", "shap"]) {
        return Err(bad("shap_points.csv", "unexpected header"));
    }
    let mut groups: Vec<FeatureShap> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad("shap_points.csv", e))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad("shap_points.csv", e));
        let (pct, shap) = (num(3)?, num(4)?);
        match groups.iter_mut().find(|g| g.name == rec[1]) {
            Some(g) => g.points.push((shap, pct)),
            None => groups.push(FeatureShap {
                name: rec[1].to_string(),
                points: vec![(shap, pct)],
            }),
        }
    }
    // stable sort keeps file order among ties
    groups.sort_by(|a, b| b.mean_abs().total_cmp(&a.mean_abs()));
    Ok(groups)
}

pub fn beeswarm_svg(features: &[FeatureShap]) -> String {
    let row_h = 36.0;
    let (left, right, top, bottom) = (150.0, 90.0, 40.0, 56.0);
    let plot_w = 480.0;
    let height = top + bottom + row_h * features.len().max(1) as f64;
    let mut svg = Svg::new(left + plot_w + right, height);
    svg.text(left + plot_w / 2.0, 24.0, 15.0, "middle", "Shapley summary");

    let all = features.iter().flat_map(|f| f.points.iter().map(|p| p.0));
    let (mut lo, mut hi) = all.fold((0.0f64, 0.0f64), |(l, h), v| (l.min(v), h.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = |v: f64| left + (v - lo) / (hi - lo) * plot_w;
    let axis_y = top + row_h * features.len() as f64;

    svg.line(sx(0.0), top, sx(0.0), axis_y, "#999999", 1.0);
    svg.line(left, axis_y, left + plot_w, axis_y, "#333333", 1.0);
    for t in ticks(lo, hi, 6) {
        svg.line(sx(t), axis_y, sx(t), axis_y + 4.0, "#333333", 1.0);
        svg.text(sx(t), axis_y + 17.0, 11.0, "middle", &tick_label(t));
    }
    svg.text(left + plot_w / 2.0, axis_y + 40.0, 12.0, "middle", "Shapley value (impact on model output)");

    let dot = 2.6;
    for (i, f) in features.iter().enumerate() {
        let cy = top + row_h * (i as f64 + 0.5);
        svg.line(left, cy, left + plot_w, cy, "#eeeeee", 1.0);
        svg.text(left - 10.0, cy + 4.0, 12.0, "end", &f.name);
        let mut pts = f.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        // stack points that share a pixel bin, alternating above and below the row centre
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for (shap, pct) in pts {
            let x = sx(shap);
            let k = bins.entry((x / (2.0 * dot)).floor() as i64).or_insert(0);
            let step = ((*k + 1) / 2) as f64 * if *k % 2 == 1 { -1.0 } else { 1.0 };
            *k += 1;
            let y = cy + (step * dot * 1.6).clamp(-row_h / 2.0 + dot, row_h / 2.0 - dot);
            svg.circle(x, y, dot, &percentile_colour(pct));
        }
    }

    let bar_x = left + plot_w + 30.0;
    let bar_h = (axis_y - top).max(60.0);
    svg.vertical_gradient("pct", &percentile_colour(0.0), &percentile_colour(1.0));
    svg.rect(bar_x, top, 10.0, bar_h, "url(#pct)", "none");
    svg.text(bar_x + 5.0, top - 6.0, 10.0, "middle", "High");
    svg.text(bar_x + 5.0, top + bar_h + 14.0, 10.0, "middle", "Low");
    svg.vertical_text(bar_x + 26.0, top + bar_h / 2.0, 11.0, "Feature value");
    svg.finish()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

pub fn boxplot_svg(feature: &str, groups: &[(EventLabel, Vec<f64>)]) -> String {
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 60.0);
    let slot = 80.0;
    let plot_h = 260.0;
    let width = (left + right + slot * groups.len().max(1) as f64).max(240.0);
    let mut svg = Svg::new(width, top + plot_h + bottom);
    svg.text(width / 2.0, 24.0, 15.0, "middle", &format!("{feature} by event"));

    let all = groups.iter().flat_map(|g| g.1.iter().copied());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let sy = |v: f64| top + plot_h - (v - lo) / (hi - lo) * plot_h;

    svg.line(left, top, left, top + plot_h, "#333333", 1.0);
    svg.line(left, top + plot_h, width - right, top + plot_h, "#333333", 1.0);
    for t in ticks(lo, hi, 5) {
        svg.line(left - 4.0, sy(t), left, sy(t), "#333333", 1.0);
        svg.text(left - 7.0, sy(t) + 4.0, 11.0, "end", &tick_label(t));
    }
    svg.vertical_text(18.0, top + plot_h / 2.0, 12.0, feature);

    for (i, (label, values)) in groups.iter().enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        svg.text(cx, top + plot_h + 18.0, 11.0, "middle", label.as_str());
        svg.text(cx, top + plot_h + 32.0, 10.0, "middle", &format!("n={}", values.len()));
        if values.is_empty() {
            continue;
        }
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let w_lo = v.iter().copied().find(|x| *x >= lo_fence).unwrap_or(q1);
        let w_hi = v.iter().rev().copied().find(|x| *x <= hi_fence).unwrap_or(q3);
        let half = 18.0;
        svg.line(cx, sy(w_lo), cx, sy(q1), "#333333", 1.0);
        svg.line(cx, sy(q3), cx, sy(w_hi), "#333333", 1.0);
        svg.line(cx - half / 2.0, sy(w_lo), cx + half / 2.0, sy(w_lo), "#333333", 1.0);
        svg.line(cx - half / 2.0, sy(w_hi), cx + half / 2.0, sy(w_hi), "#333333", 1.0);
        svg.rect(cx - half, sy(q3), 2.0 * half, (sy(q1) - sy(q3)).max(0.5), "#9ecae1", "#333333");
        svg.line(cx - half, sy(med), cx + half, sy(med), "#08306b", 2.0);
        for x in v.iter().filter(|x| **x < w_lo || **x > w_hi) {
            svg.circle(cx, sy(*x), 2.5, "#333333");
        }
    }
    svg.finish()
}

pub fn confusion_svg(labels: &[f64], counts: &[Vec<u64>]) -> String {
    let cell = 44.0;
    let (left, top) = (90.0, 60.0);
    let k = labels.len() as f64;
    let width = left + cell * k + 30.0;
    let height = top + cell * k + 50.0;
    let mut svg = Svg::new(width, height);
    svg.text(width / 2.0, 24.0, 15.0, "middle", "Confusion matrix");
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let y = top + cell * i as f64;
        svg.text(left - 8.0, y + cell / 2.0 + 4.0, 11.0, "end", &tick_label(labels[i]));
        for (j, &c) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let share = if total == 0 { 0.0 } else { c as f64 / total as f64 };
            svg.rect(x, y, cell, cell, &heat_colour(share), "#cccccc");
            let ink = if share > 0.5 { "white" } else { "black" };
            svg.text_fill(x + cell / 2.0, y + cell / 2.0 + 4.0, 12.0, "middle", ink, &c.to_string());
        }
    }
    for (j, l) in labels.iter().enumerate() {
        svg.text(left + cell * (j as f64 + 0.5), top - 8.0, 11.0, "middle", &tick_label(*l));
    }
    svg.text(left + cell * k / 2.0, top - 26.0, 11.0, "middle", "Predicted");
    svg.vertical_text(20.0, top + cell * k / 2.0, 11.0, "True");
    svg.finish()
}

fn event_groups(rows: &[WindowFeatureRow], feature: &str) -> Vec<(EventLabel, Vec<f64>)> {
    EVENT_ORDER
        .iter()
        .map(|&l| {
            let v: Vec<f64> = rows.iter().filter(|r| r.label == l).filter_map(|r| r.value(feature)).collect();
            (l, v)
        })
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

fn f4(s: &str) -> String {
    s.parse::<f64>().map(|v| format!("{v:.4}")).unwrap_or_else(|_| s.to_string())
}

pub(super) fn run(run_dir: &Path, out: &Path) -> Result<(), CliError> {
    for name in REPORT_INPUTS {
        if !run_dir.join(name).is_file() {
            return Err(CliError::Report(format!("missing input {}", run_dir.join(name).display())));
        }
    }
    let rows = load_features(run_dir, CliError::Report)?;
    let metrics: Value = serde_json::from_str(&read_text(&run_dir.join("metrics.json"), CliError::Report)?)
        .map_err(|e| bad("metrics.json", e))?;
    let shap = read_shap_points(&read_text(&run_dir.join("shap_points.csv"), CliError::Report)?)?;
    let importance = read_text(&run_dir.join("importance.csv"), CliError::Report)?;
    let stats = read_stats_report(&read_text(&run_dir.join("stats_report.csv"), CliError::Report)?)
        .map_err(|e| bad("stats_report.csv", e))?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut md = String::new();
    let _ = writeln!(md, "# dermalab report\n");

    let task = metrics["task"].as_str().unwrap_or("unknown");
    let target = metrics["target"].as_str().unwrap_or("unknown");
    let _ = writeln!(md, "## Model\n");
    let _ = writeln!(md, "- task: {task}");
    let _ = writeln!(md, "- target: {target}");
    if let Some(r2) = metrics["r2"].as_f64() {
        let _ = writeln!(md, "- held-out R²: {r2:.4}");
    }
    if let Some(acc) = metrics["accuracy"].as_f64() {
        let _ = writeln!(md, "- held-out accuracy: {acc:.4}");
    }
    let _ = writeln!(md, "\n| feature | impurity importance | mean abs Shapley |\n|---|---|---|");
    let mut imp = csv::Reader::from_reader(importance.as_bytes());
    for rec in imp.records() {
        let rec = rec.map_err(|e| bad("importance.csv", e))?;
        if rec.len() != 3 {
            return Err(bad("importance.csv", "expected 3 columns"));
        }
        let _ = writeln!(md, "| {} | {} | {} |", &rec[0], f4(&rec[1]), f4(&rec[2]));
    }

    files.push(("shap_summary.svg".into(), beeswarm_svg(&shap).into_bytes()));
    let _ = writeln!(md, "\n![Shapley summary](shap_summary.svg)\n");

    if let Some(cm) = metrics.get("confusion").filter(|c| !c.is_null()) {
        let labels: Vec<f64> = serde_json::from_value(cm["labels"].clone()).map_err(|e| bad("metrics.json", e))?;
        let counts: Vec<Vec<u64>> =
            serde_json::from_value(cm["counts"].clone()).map_err(|e| bad("metrics.json", e))?;
        files.push(("confusion.svg".into(), confusion_svg(&labels, &counts).into_bytes()));
        let _ = writeln!(md, "![Confusion matrix](confusion.svg)\n");
    }

    let _ = writeln!(md, "## EDA features by event\n");
    for f in SUMMARY_FEATURES {
        let name = format!("box_{f}.svg");
        files.push((name.clone(), boxplot_svg(f, &event_groups(&rows, f)).into_bytes()));
        let _ = writeln!(md, "![{f} by event]({name})\n");
    }

    if let Some(summary) = stats.get("summary") {
        let events: Vec<&str> = EVENT_ORDER
            .iter()
            .map(|l| l.as_str())
            .filter(|l| summary.iter().any(|r| &r[1] == *l))
            .collect();
        let _ = writeln!(md, "| feature | {} |", events.join(" | "));
        let _ = writeln!(md, "|---|{}", "---|".repeat(events.len()));
        for f in SUMMARY_FEATURES {
            let cells: Vec<String> = events
                .iter()
                .map(|e| {
                    summary
                        .iter()
                        .find(|r| &r[1] == *e && &r[2] == f)
                        .map(|r| r[6].to_string())
                        .unwrap_or_default()
                })
                .collect();
            let _ = writeln!(md, "| {f} | {} |", cells.join(" | "));
        }
        md.push('\n');
    }
    if let Some(k) = stats.get("kruskal") {
        let _ = writeln!(md, "## Kruskal-Wallis\n\n| comparison | feature | n | H | df | p |\n|---|---|---|---|---|---|");
        for r in k {
            let _ = writeln!(md, "| {} | {} | {} | {} | {} | {} |", &r[1], &r[2], &r[3], f4(&r[7]), &r[8], f4(&r[9]));
        }
        md.push('\n');
    }
    if let Some(s) = stats.get("spearman") {
        let _ = writeln!(md, "## Spearman against SAM\n\n| domain | feature | n | rho |\n|---|---|---|---|");
        for r in s {
            let _ = writeln!(md, "| {} | {} | {} | {} |", &r[1], &r[2], &r[3], f4(&r[10]));
        }
        md.push('\n');
    }

    let plots: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    let log = json!({
        "command": "report",
        "inputs": REPORT_INPUTS,
        "plots": plots,
        "shap_order": shap.iter().map(|f| &f.name).collect::<Vec<_>>(),
    });
    let log = json_bytes(&log);
    files.push(("report.md".into(), md.into_bytes()));
    files.push(("report_log.json".into(), log));
    write_outputs(out, &files, CliError::Report)
}
