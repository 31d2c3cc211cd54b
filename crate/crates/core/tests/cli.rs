use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use dermalab::features::{read_features_csv, write_features_csv};
use dermalab::ingest::SamResponse;
use dermalab::stats::read_stats_report;
use dermalab::synth::SESSION_FILES;
use tempfile::TempDir;

fn dermalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dermalab"))
        .args(args)
        .env_remove("DERMALAB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = dermalab(args);
    assert!(
        out.status.success(),
        "dermalab {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// One 8-window session and its pipeline run, shared by the tests below.
struct Fixture {
    _dir: TempDir,
    session: PathBuf,
    run: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let session = dir.path().join("session");
        let run = dir.path().join("run");
        ok(&["--seed", "7", "synth", "--windows", "8", "--relation", "co2", "-o", p(&session)]);
        ok(&["pipeline", "--session", p(&session), "-o", p(&run)]);
        Fixture { _dir: dir, session, run }
    })
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for (name, bytes) in snapshot(from) {
        std::fs::write(to.join(name), bytes).unwrap();
    }
}

#[test]
fn synth_writes_six_files() {
    let f = fixture();
    let names: Vec<String> = snapshot(&f.session).into_keys().collect();
    let mut want: Vec<String> = SESSION_FILES.iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(names, want);
}

#[test]
fn synth_without_out_is_a_usage_error() {
    let out = dermalab(&["synth", "--windows", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn synth_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["--seed", "7", "synth", "--windows", "8", "--relation", "co2", "-o", p(&a)]);
    ok(&["--seed", "7", "synth", "--windows", "8", "--relation", "co2", "-o", p(&b)]);
    ok(&["--seed", "8", "synth", "--windows", "8", "--relation", "co2", "-o", p(&c)]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_ne!(snapshot(&a)["eda.csv"], snapshot(&c)["eda.csv"]);
    assert_eq!(snapshot(&a), snapshot(&fixture().session));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let status = Command::new(env!("CARGO_BIN_EXE_dermalab"))
        .args(["synth", "--windows", "3", "-o", p(&a)])
        .env("DERMALAB_SEED", "5")
        .status()
        .unwrap();
    assert!(status.success());
    ok(&["--seed", "5", "synth", "--windows", "3", "-o", p(&b)]);
    assert_eq!(snapshot(&a), snapshot(&b));

    let bad = Command::new(env!("CARGO_BIN_EXE_dermalab"))
        .args(["synth", "--windows", "3", "-o", p(&a)])
        .env("DERMALAB_SEED", "five")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn pipeline_writes_one_row_per_task_window() {
    let f = fixture();
    let files = snapshot(&f.run);
    let rows = read_features_csv(&files["features.csv"][..]).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(files.keys().filter(|k| k.starts_with("decomp_")).count(), 8);
    let log: serde_json::Value = serde_json::from_slice(&files["pipeline_log.json"]).unwrap();
    assert_eq!(log["command"], "pipeline");
    assert!(log["config"]["cvxeda"]["alpha"].is_number());
}

#[test]
fn pipeline_rerun_is_identical() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("run");
    ok(&["pipeline", "--session", p(&f.session), "-o", p(&again)]);
    assert_eq!(snapshot(&f.run), snapshot(&again));
}

#[test]
fn corrupt_env_leaves_no_features() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("session");
    copy_dir(&f.session, &session);
    let env = std::fs::read_to_string(session.join("env.csv")).unwrap();
    let mut lines: Vec<String> = env.lines().map(str::to_string).collect();
    lines[5] = lines[5].replacen(',', ",oops,", 1);
    std::fs::write(session.join("env.csv"), lines.join("\n")).unwrap();

    let out_dir = dir.path().join("run");
    let out = dermalab(&["pipeline", "--session", p(&session), "-o", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("features.csv").exists());
}

#[test]
fn missing_session_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dermalab(&["pipeline", "--session", p(&dir.path().join("nope")), "-o", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn regression_metrics_schema() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    ok(&["--set", "forest.n_trees=50", "analyze", "--run", p(&f.run), "-o", p(&out)]);
    let files = snapshot(&out);
    for name in ["model.json", "metrics.json", "shap_points.csv", "importance.csv", "analyze_log.json"] {
        assert!(files.contains_key(name), "{name}");
    }
    let m: serde_json::Value = serde_json::from_slice(&files["metrics.json"]).unwrap();
    assert_eq!(m["task"], "regression");
    assert_eq!(m["target"], "tvsymp");
    assert!(m["r2"].is_number());
    assert!(m["confusion"].is_null());
    let model: serde_json::Value = serde_json::from_slice(&files["model.json"]).unwrap();
    assert_eq!(model["trees"].as_array().unwrap().len(), 50);
}

#[test]
fn classification_metrics_schema() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    ok(&[
        "--set", "forest.n_trees=100", "analyze", "--run", p(&f.run), "--task", "classification", "-o", p(&out),
    ]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["task"], "classification");
    assert_eq!(m["target"], "arousal");
    let acc = m["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let counts = m["confusion"]["counts"].as_array().unwrap();
    let total: u64 = counts.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, m["n_test"].as_u64().unwrap());
}

#[test]
fn single_class_target_exits_4() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read(f.run.join("features.csv")).unwrap();
    let mut rows = read_features_csv(&text[..]).unwrap();
    for r in &mut rows {
        let s = r.sam.expect("synthetic rows carry SAM");
        r.sam = Some(SamResponse::new(s.event_id, s.valence, 5, s.dominance).unwrap());
    }
    let mut out = Vec::new();
    write_features_csv(&rows, &mut out).unwrap();
    std::fs::write(dir.path().join("features.csv"), out).unwrap();
    let res = dermalab(&["analyze", "--run", p(dir.path()), "--task", "classification"]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!dir.path().join("metrics.json").exists());
}

#[test]
fn target_that_is_an_input_is_rejected() {
    let f = fixture();
    let res = dermalab(&["analyze", "--run", p(&f.run), "--target", "co2_ppm"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn planted_co2_relation_is_learned() {
    let dir = tempfile::tempdir().unwrap();
    let (session, run) = (dir.path().join("s"), dir.path().join("r"));
    ok(&["--seed", "7", "synth", "--windows", "60", "--relation", "co2", "-o", p(&session)]);
    ok(&["pipeline", "--session", p(&session), "-o", p(&run)]);
    ok(&["analyze", "--run", p(&run)]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("metrics.json")).unwrap()).unwrap();
    let r2 = m["r2"].as_f64().unwrap();
    assert!(r2 >= 0.5, "held-out R2 {r2}");
}

#[test]
fn identical_groups_give_p_near_one() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["stats", "--run", p(&f.run), "-o", p(dir.path()), "--compare", "Same=task/task"]);
    let text = std::fs::read_to_string(dir.path().join("stats_report.csv")).unwrap();
    let sections = read_stats_report(&text).unwrap();
    let kruskal = &sections["kruskal"];
    assert_eq!(kruskal.len(), 4);
    for rec in kruskal {
        let pv: f64 = rec[9].parse().unwrap();
        assert!(pv > 0.999, "{rec:?}");
    }
    assert!(sections.contains_key("summary"));
    assert!(sections.contains_key("spearman"));
}

#[test]
fn default_comparisons_need_stimulus_windows() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let res = dermalab(&["stats", "--run", p(&f.run), "-o", p(dir.path())]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn missing_sam_omits_spearman() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("session");
    copy_dir(&f.session, &session);
    std::fs::remove_file(session.join("sam.csv")).unwrap();
    let run = dir.path().join("run");
    ok(&["--set", "pipeline.decompose=false", "pipeline", "--session", p(&session), "-o", p(&run)]);
    let res = dermalab(&["stats", "--run", p(&run), "--compare", "Same=task/task", "-o", p(&run)]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("Spearman section omitted"));
    let text = std::fs::read_to_string(run.join("stats_report.csv")).unwrap();
    assert!(!read_stats_report(&text).unwrap().contains_key("spearman"));
}

/// Row labels of the beeswarm, top to bottom.
fn beeswarm_rows(svg: &str) -> Vec<String> {
    let mut rows: Vec<(f64, String)> = svg
        .lines()
        .filter(|l| l.starts_with("<text") && l.contains(r#"font-size="12.0" text-anchor="end""#))
        .map(|l| {
            let y: f64 = l.split(r#"y=""#).nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
            let label = l.split('>').nth(1).unwrap().split('<').next().unwrap().to_string();
            (y, label)
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.into_iter().map(|r| r.1).collect()
}

#[test]
fn report_renders_and_reruns_identically() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    copy_dir(&f.run, &run);
    ok(&["--set", "forest.n_trees=100", "analyze", "--run", p(&run)]);
    ok(&["stats", "--run", p(&run), "--compare", "Same=task/task", "-o", p(&run)]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["report", "--run", p(&run), "-o", p(&a)]);
    ok(&["report", "--run", p(&run), "-o", p(&b)]);
    let files = snapshot(&a);
    assert_eq!(files, snapshot(&b));
    assert!(files.keys().filter(|k| k.ends_with(".svg")).count() >= 3);
    let md = String::from_utf8(files["report.md"].clone()).unwrap();
    assert!(md.contains("shap_summary.svg"));

    let mut imp = csv::Reader::from_path(run.join("importance.csv")).unwrap();
    let mut ranked: Vec<(String, f64)> = imp
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[2].parse().unwrap())
        })
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
    let want: Vec<String> = ranked.into_iter().map(|r| r.0).collect();
    let svg = String::from_utf8(files["shap_summary.svg"].clone()).unwrap();
    assert_eq!(beeswarm_rows(&svg), want);
}

#[test]
fn report_without_inputs_exits_6() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let res = dermalab(&["report", "--run", p(&f.run), "-o", p(dir.path())]);
    assert_eq!(res.status.code(), Some(6));
}
