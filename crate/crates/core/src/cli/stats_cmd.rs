use std::path::Path;

use serde_json::json;

use crate::stats::{
    default_comparisons, event_summary, run_comparison, sam_correlations, write_stats_report, Comparison,
    SUMMARY_FEATURES,
};

use super::analyze::load_features;
use super::{json_bytes, write_outputs, CliError};

pub(super) fn run(run_dir: &Path, out: &Path, specs: &[String]) -> Result<(), CliError> {
    let comparisons = if specs.is_empty() {
        default_comparisons()
    } else {
        specs
            .iter()
            .map(|s| Comparison::parse(s).map_err(CliError::Usage))
            .collect::<Result<Vec<_>, _>>()?
    };
    let rows = load_features(run_dir, CliError::Usage)?;

    let summary = event_summary(&rows, &SUMMARY_FEATURES);
    let mut results = Vec::new();
    for cmp in &comparisons {
        for f in SUMMARY_FEATURES {
            let r = run_comparison(&rows, cmp, f).map_err(|e| CliError::Stats(format!("{}: {e}", cmp.name)))?;
            results.push(r);
        }
    }
    let correlations = if rows.iter().any(|r| r.sam.is_some()) {
        sam_correlations(&rows, &SUMMARY_FEATURES)
    } else {
        eprintln!("warning: no SAM ratings in features.csv; Spearman section omitted");
        Vec::new()
    };

    let mut csv = Vec::new();
    write_stats_report(&summary, &results, &correlations, &mut csv).map_err(|e| CliError::Stats(e.to_string()))?;
    let log = json!({
        "command": "stats",
        "rows": rows.len(),
        "features": SUMMARY_FEATURES,
        "comparisons": comparisons,
        "spearman": !correlations.is_empty(),
    });
    write_outputs(
        out,
        &[
            ("stats_report.csv".to_string(), csv),
            ("stats_log.json".to_string(), json_bytes(&log)),
        ],
        CliError::Stats,
    )
}
