use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cvxeda::{decompose, Decomposition, KktResiduals, SolverReport};
use crate::dsp::{design_butterworth, standardize, zero_phase_filter, zscore_clean, FilterKind};
use crate::features::{extract_window_features, write_features_csv, WindowFeatureRow, MIN_WINDOW_S};
use crate::ingest::{
    label_stress, parse_eda_csv, parse_env_csv, parse_events_csv, parse_reports_csv, parse_sam_csv,
    window_align, AlignedWindow, IngestError, RawEdaTrace,
};

use super::{json_bytes, write_outputs, CliError, RunConfig};

fn ingest(e: IngestError) -> CliError {
    CliError::Ingest(e.to_string())
}

/// Outputs owned by this command, removed before a run so a failure leaves none behind.
fn clear_previous(out: &Path) {
    let Ok(entries) = std::fs::read_dir(out) else {
        return;
    };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let ours = name == "features.csv"
            || name == "pipeline_log.json"
            || (name.starts_with("decomp_") && name.ends_with(".csv"));
        if ours {
            let _ = std::fs::remove_file(entry.path());
        }
    }
}

fn optional<T>(path: &Path, parse: fn(&Path) -> Result<T, IngestError>) -> Result<Option<T>, CliError> {
    if path.exists() {
        parse(path).map(Some).map_err(ingest)
    } else {
        eprintln!("warning: {} not found; continuing without it", path.display());
        Ok(None)
    }
}

/// Stand-in when decomposition is disabled: the whole filtered signal is
/// treated as phasic.
fn passthrough(w: &AlignedWindow) -> Decomposition {
    let n = w.eda.len();
    Decomposition {
        sample_rate: w.eda.sample_rate,
        tonic: vec![0.0; n],
        phasic: w.eda.samples.clone(),
        driver: vec![0.0; n],
        residual: vec![0.0; n],
        objective_value: 0.0,
        report: SolverReport {
            iterations: 0,
            kkt: KktResiduals::default(),
            objective_trace: Vec::new(),
        },
    }
}

pub(super) fn run(session: &Path, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    if !session.is_dir() {
        return Err(CliError::Ingest(format!("session directory {} not found", session.display())));
    }
    if out.exists() && std::fs::canonicalize(out).ok() == std::fs::canonicalize(session).ok() {
        return Err(CliError::Usage("output directory must differ from the session directory".into()));
    }
    clear_previous(out);

    let eda = parse_eda_csv(&session.join("eda.csv")).map_err(ingest)?;
    let env = parse_env_csv(&session.join("env.csv")).map_err(ingest)?;
    let timeline = parse_events_csv(&session.join("events.csv")).map_err(ingest)?;
    let sam = optional(&session.join("sam.csv"), parse_sam_csv)?;
    let reports = optional(&session.join("reports.csv"), parse_reports_csv)?;

    let toggles = &cfg.pipeline;
    let mut samples = eda.samples.clone();
    let mut flagged = 0;
    if toggles.clean {
        let (cleaned, idx) = zscore_clean(&samples, &cfg.clean).map_err(|e| CliError::Ingest(e.to_string()))?;
        samples = cleaned;
        flagged = idx.len();
    }
    if toggles.normalize {
        samples = standardize(&samples).map_err(|e| CliError::Ingest(e.to_string()))?;
    }
    let lowpass = design_butterworth(FilterKind::Lowpass, toggles.lowpass_hz, toggles.lowpass_order, eda.sample_rate)
        .map_err(|e| CliError::Ingest(format!("lowpass at {} Hz: {e}", toggles.lowpass_hz)))?;
    let samples = zero_phase_filter(&lowpass, &samples).map_err(|e| CliError::Ingest(e.to_string()))?;
    let trace = RawEdaTrace::new(eda.start_ms, eda.sample_rate, samples);

    let windows = window_align(&trace, &env, &timeline).map_err(ingest)?;
    let (eligible, skipped): (Vec<_>, Vec<_>) = windows.iter().partition(|w| w.duration_s() >= MIN_WINDOW_S);
    for w in &skipped {
        eprintln!(
            "skipping event {} ({}): {:.1} s is shorter than {MIN_WINDOW_S} s",
            w.event_id,
            w.label,
            w.duration_s()
        );
    }

    let results = eligible
        .par_iter()
        .map(|w| {
            let d = if toggles.decompose {
                decompose(&w.eda.samples, w.eda.sample_rate, &cfg.cvxeda)
                    .map_err(|e| CliError::Modeling(format!("event {}: {e}", w.event_id)))?
            } else {
                passthrough(w)
            };
            let row = extract_window_features(w, &d, &cfg.features)
                .map_err(|e| CliError::Modeling(format!("event {}: {e}", w.event_id)))?;
            Ok((row, d))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let sam_by_id: HashMap<u32, _> = sam.iter().flatten().map(|s| (s.event_id, *s)).collect();
    let stress_by_id: HashMap<u32, _> = reports
        .iter()
        .flatten()
        .map(|r| (r.window_id, label_stress(r)))
        .collect();
    let rows: Vec<WindowFeatureRow> = results
        .iter()
        .map(|(row, _)| WindowFeatureRow {
            sam: sam_by_id.get(&row.window_id).copied(),
            stress: stress_by_id.get(&row.window_id).copied(),
            ..row.clone()
        })
        .collect();

    let mut files = Vec::new();
    let mut log_windows = Vec::new();
    for (w, (_, d)) in eligible.iter().zip(&results) {
        let mut buf = Vec::new();
        if toggles.decompose {
            d.write_csv(w.start_ms, &mut buf).expect("writing to memory");
            files.push((format!("decomp_{}.csv", w.event_id), buf));
        }
        log_windows.push(json!({
            "event_id": w.event_id,
            "label": w.label,
            "duration_s": w.duration_s(),
            "status": "featurized",
            "solver": toggles.decompose.then(|| d.summary()),
        }));
    }
    for w in &skipped {
        log_windows.push(json!({
            "event_id": w.event_id,
            "label": w.label,
            "duration_s": w.duration_s(),
            "status": "skipped_short",
            "solver": Value::Null,
        }));
    }
    log_windows.sort_by_key(|v| v["event_id"].as_u64());

    let mut csv = Vec::new();
    write_features_csv(&rows, &mut csv).map_err(|e| CliError::Modeling(e.to_string()))?;
    files.push(("features.csv".into(), csv));
    let log = json!({
        "command": "pipeline",
        "config": cfg,
        "eda_sample_rate_hz": eda.sample_rate,
        "eda_samples": eda.len(),
        "flagged_samples": flagged,
        "min_window_s": MIN_WINDOW_S,
        "inputs": { "sam": sam.is_some(), "reports": reports.is_some() },
        "windows": log_windows,
    });
    files.push(("pipeline_log.json".into(), json_bytes(&log)));
    write_outputs(out, &files, CliError::Ingest)?;
    eprintln!("featurized {} of {} events into {}", rows.len(), windows.len(), out.display());
    Ok(())
}
