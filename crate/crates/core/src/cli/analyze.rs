use serde_json::{json, Value};

use crate::features::{read_features_csv, WindowFeatureRow};
use crate::forest::{
    evaluate_classification, evaluate_regression, fit, shap_summary_points, train_test_split,
    write_shap_points_csv, ForestError, ForestParams, Task,
};
use crate::ingest::EnvChannel;

use super::{json_bytes, read_text, write_outputs, AnalyzeArgs, CliError, RunConfig, TaskArg};

/// Inputs of the classification task.
pub const CLASSIFICATION_FEATURES: [&str; 3] = ["tvsymp", "edasymp_n", "nsscr"];

const TARGET_COLUMNS: [&str; 8] = [
    "tvsymp", "edasymp", "edasymp_n", "nsscr", "valence", "arousal", "dominance", "stress",
];

fn modeling(e: ForestError) -> CliError {
    CliError::Modeling(e.to_string())
}

pub(super) fn load_features(dir: &std::path::Path, err: fn(String) -> CliError) -> Result<Vec<WindowFeatureRow>, CliError> {
    let path = dir.join("features.csv");
    let text = read_text(&path, err)?;
    read_features_csv(text.as_bytes()).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub(super) fn run(a: &AnalyzeArgs, cfg: &RunConfig, seed: u64) -> Result<(), CliError> {
    let out = a.out.as_deref().unwrap_or(&a.run);
    let rows = load_features(&a.run, CliError::Usage)?;

    let (task, inputs, target): (Task, Vec<String>, String) = match a.task {
        TaskArg::Regression => (
            Task::Regression,
            EnvChannel::ALL.iter().map(|c| c.column().to_string()).collect(),
            a.target.clone().unwrap_or_else(|| "tvsymp".into()),
        ),
        TaskArg::Classification => (
            Task::Classification,
            CLASSIFICATION_FEATURES.iter().map(|s| s.to_string()).collect(),
            a.target.clone().unwrap_or_else(|| "arousal".into()),
        ),
    };
    if inputs.contains(&target) {
        return Err(CliError::Usage(format!("target `{target}` is also a model input")));
    }
    let known = TARGET_COLUMNS.contains(&target.as_str()) || EnvChannel::from_column(&target).is_some();
    if !known {
        return Err(CliError::Usage(format!("unknown target column `{target}`")));
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut ids = Vec::new();
    for r in &rows {
        let Some(t) = r.value(&target) else { continue };
        let feats: Option<Vec<f64>> = inputs.iter().map(|c| r.value(c)).collect();
        let feats = feats.expect("input columns are always present");
        x.push(feats);
        y.push(t);
        ids.push(r.window_id);
    }
    if x.is_empty() {
        return Err(CliError::Modeling(format!("no rows carry target `{target}`")));
    }

    let params = cfg.forest.resolve(ForestParams::for_task(task), seed);
    let (train, test) = train_test_split(x.len(), cfg.split_ratio, seed).map_err(modeling)?;
    let pick = |idx: &[usize], v: &[Vec<f64>]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let (x_train, x_test) = (pick(&train, &x), pick(&test, &x));
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();

    let model = fit(&x_train, &y_train, task, &inputs, &params).map_err(modeling)?;

    let mut metrics = json!({
        "task": match task { Task::Regression => "regression", Task::Classification => "classification" },
        "target": target,
        "features": inputs,
        "n_rows": x.len(),
        "n_train": train.len(),
        "n_test": test.len(),
        "seed": seed,
    });
    match task {
        Task::Regression => {
            let r2 = evaluate_regression(&model, &x_test, &y_test).map_err(modeling)?;
            metrics["r2"] = json!(r2);
            metrics["confusion"] = Value::Null;
        }
        Task::Classification => {
            let (acc, cm) = evaluate_classification(&model, &x_test, &y_test).map_err(modeling)?;
            metrics["accuracy"] = json!(acc);
            metrics["confusion"] = json!(cm);
        }
    }

    let background: Vec<Vec<f64>> = x_train.iter().take(cfg.background_max).cloned().collect();
    let points = shap_summary_points(&model, &x, &background).map_err(modeling)?;
    let p = inputs.len();
    let mut mean_abs = vec![0.0; p];
    for pt in &points {
        mean_abs[pt.feature] += pt.shap.abs() / x.len() as f64;
    }
    let importance = model.impurity_importance();

    let mut shap_csv = Vec::new();
    write_shap_points_csv(&points, &inputs, &mut shap_csv).map_err(|e| CliError::Modeling(e.to_string()))?;
    let mut imp = csv::Writer::from_writer(Vec::new());
    imp.write_record(["feature", "importance", "mean_abs_shap"]).expect("in-memory csv");
    for j in 0..p {
        imp.write_record([inputs[j].clone(), importance[j].to_string(), mean_abs[j].to_string()])
            .expect("in-memory csv");
    }
    let imp = imp.into_inner().expect("in-memory csv");

    let log = json!({
        "command": "analyze",
        "task": metrics["task"],
        "target": metrics["target"],
        "forest": params,
        "split_ratio": cfg.split_ratio,
        "seed": seed,
        "background_rows": background.len(),
        "shap_rows": x.len(),
        "window_ids": ids,
        "train_rows": train,
        "test_rows": test,
    });
    let files = vec![
        ("model.json".to_string(), format!("{}\n", model.to_json()).into_bytes()),
        ("metrics.json".to_string(), json_bytes(&metrics)),
        ("shap_points.csv".to_string(), shap_csv),
        ("importance.csv".to_string(), imp),
        ("analyze_log.json".to_string(), json_bytes(&log)),
    ];
    write_outputs(out, &files, CliError::Modeling)?;
    eprintln!("{}", serde_json::to_string(&metrics).expect("json"));
    Ok(())
}
