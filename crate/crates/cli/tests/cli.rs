use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SPEC: &str = r#"
n_features = 5
periods = 5
rows_per_period = 200

[label_rule]
features = [0, 1]
threshold = 0.8

[[drifts]]
period = 3
features = [0]
magnitude = 3.0

[churn]
features = [3, 4]
magnitude = 0.5
"#;

fn mcudi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcudi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes a stream into `dir` and returns (csv, config) paths, with the
/// generated config shrunk to a fast forest and three seeds.
fn synthesize(dir: &Path) -> (PathBuf, PathBuf) {
    let spec = dir.join("spec.toml");
    fs::write(&spec, SPEC).unwrap();
    let out = dir.join("synth");
    let o = mcudi(&["synth", "--spec", s(&spec), "--seed", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let config = out.join("config.toml");
    let text = fs::read_to_string(&config).unwrap();
    let text = text.replace("n_trees = 100", "n_trees = 15");
    let text = with_three_seeds(&text);
    fs::write(&config, text).unwrap();
    (out.join("stream.csv"), config)
}

fn with_three_seeds(text: &str) -> String {
    let start = text.find("seeds = [").unwrap();
    let end = start + text[start..].find(']').unwrap() + 1;
    format!("{}seeds = [1, 2, 3]{}", &text[..start], &text[end..])
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn synth_writes_stream_ledger_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, config) = synthesize(dir.path());
    let lines = fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(lines, 1 + 5 * 200);
    let ledger: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(csv.with_file_name("injections.json")).unwrap())
            .unwrap();
    assert_eq!(ledger["drift_periods"], serde_json::json!([3]));
    assert!(fs::read_to_string(config)
        .unwrap()
        .contains("feature_columns"));
}

#[test]
fn pipeline_commands_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, config) = synthesize(dir.path());

    let gt = dir.path().join("gt");
    let run_gt = || {
        let o = mcudi(&[
            "ground-truth",
            "--config",
            s(&config),
            "--csv",
            s(&csv),
            "--out",
            s(&gt),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        snapshot(&gt)
    };
    let first = run_gt();
    assert_eq!(first, run_gt());
    let truth = String::from_utf8(first["ground_truth.jsonl"].clone()).unwrap();
    assert_eq!(truth.lines().count(), 4);
    for name in [
        "ground_truth.txt",
        "severity_series.csv",
        "feature_changes.csv",
        "run.json",
        "effective_config.toml",
    ] {
        assert!(first.contains_key(name), "missing {name}");
    }
    let run: serde_json::Value = serde_json::from_slice(&first["run.json"]).unwrap();
    assert_eq!(run["config"]["alpha"], 0.05);
    assert_eq!(run["config"]["folds"], 10);
    assert_eq!(run["config"]["seeds"], serde_json::json!([1, 2, 3]));

    let ev = dir.path().join("ev");
    let truth_file = gt.join("ground_truth.jsonl");
    let run_ev = || {
        let o = mcudi(&[
            "evaluate",
            "--config",
            s(&config),
            "--csv",
            s(&csv),
            "--ground-truth",
            s(&truth_file),
            "--detectors",
            "mcudi",
            "--out",
            s(&ev),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        snapshot(&ev)
    };
    let first = run_ev();
    assert_eq!(first, run_ev());
    let table = String::from_utf8(first["detection_table.txt"].clone()).unwrap();
    let periodic = table.lines().find(|l| l.starts_with("periodic")).unwrap();
    assert_eq!(
        periodic.split_whitespace().collect::<Vec<_>>(),
        ["periodic", "1.000", "0.000", "0.500", "1"]
    );
    assert!(table.lines().any(|l| l.starts_with("mcudi")));
    assert!(!table.lines().any(|l| l.starts_with("ks ")));
    let strategies = String::from_utf8(first["strategy_table.txt"].clone()).unwrap();
    assert!(strategies.contains("4.0/4"));

    let lc = dir.path().join("lc");
    let o = mcudi(&[
        "label-cost",
        "--config",
        s(&config),
        "--csv",
        s(&csv),
        "--out",
        s(&lc),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(lc.join("label_cost.json")).unwrap()).unwrap();
    for seed in report["per_seed"].as_array().unwrap() {
        assert_eq!(seed["savings"], seed["unflagged_samples"]);
    }
    assert_eq!(report["periodic"]["label_cost"], 800.0);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, config) = synthesize(dir.path());
    let out = dir.path().join("out");

    assert_eq!(mcudi(&["evaluate", "--bogus"]).status.code(), Some(2));
    assert_eq!(mcudi(&["--help"]).status.code(), Some(0));

    let bad_alpha = dir.path().join("alpha.toml");
    fs::write(
        &bad_alpha,
        fs::read_to_string(&config)
            .unwrap()
            .replace("alpha = 0.05", "alpha = 2.0"),
    )
    .unwrap();
    let o = mcudi(&[
        "ground-truth",
        "--config",
        s(&bad_alpha),
        "--csv",
        s(&csv),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let bad_column = dir.path().join("column.toml");
    fs::write(
        &bad_column,
        fs::read_to_string(&config)
            .unwrap()
            .replace("\"f4\"", "\"no_such_column\""),
    )
    .unwrap();
    let o = mcudi(&[
        "ground-truth",
        "--config",
        s(&bad_column),
        "--csv",
        s(&csv),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_column"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "f0,f1,f2,f3,f4,failure,date\n").unwrap();
    let o = mcudi(&[
        "ground-truth",
        "--config",
        s(&config),
        "--csv",
        s(&empty),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(4));

    let missing = dir.path().join("missing.csv");
    let o = mcudi(&[
        "label-cost",
        "--config",
        s(&config),
        "--csv",
        s(&missing),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
