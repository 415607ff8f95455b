use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fairaudit"));
    c.env_remove("FAIRAUDIT_DATA_DIR").env_remove("FAIRAUDIT_CONFIG_DIR");
    c
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn assert_valid(schema_file: &str, doc: &Value) {
    let text = fs::read_to_string(repo().join("schemas").join(schema_file)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let msgs: Vec<String> = match compiled.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{schema_file}: {msgs:#?}");
}

/// A 240-row loan table written to a temp dir with its config.
///
/// `all_positive_minority` gives every row of group `b` the favorable label.
fn fixture(all_positive_minority: bool) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("income,color,group,outcome\n");
    for i in 0..240u32 {
        let income = (i * 37 % 100) as f64 / 10.0;
        let color = ["red", "green", "blue"][(i % 3) as usize];
        let group = if i % 4 == 0 { "b" } else { "a" };
        let good = if all_positive_minority && group == "b" {
            true
        } else {
            income + if group == "a" { 1.5 } else { 0.0 } > 5.0 || i % 11 == 0
        };
        csv.push_str(&format!("{income},{color},{group},{}\n", if good { "yes" } else { "no" }));
    }
    fs::write(dir.path().join("loans.csv"), csv).unwrap();
    let cfg = r#"
name = "loans"
files = ["loans.csv"]
columns = [
  { name = "income", kind = "continuous" },
  { name = "color", kind = "categorical" },
  { name = "group", kind = "categorical" },
  { name = "outcome", kind = "categorical" },
]
label = { column = "outcome", value = "yes" }
sensitive = { column = "group", value = "b" }
"#;
    let path = dir.path().join("loans.toml");
    fs::write(&path, cfg).unwrap();
    (dir, path)
}

fn labels(dir: &TempDir) -> Vec<&'static str> {
    fs::read_to_string(dir.path().join("loans.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| if l.ends_with("yes") { "1" } else { "0" })
        .collect()
}

#[test]
fn audit_adult_matches_schema() {
    let data = repo().join("data");
    let out = run(&["audit", "-d", "adult", "--data-dir", data.to_str().unwrap(), "--beta", "0.8"]);
    let doc = stdout_json(&out);
    assert_valid("audit.schema.json", &doc);
    let di = doc["data_di"]["point"].as_f64().unwrap();
    assert!((di - 0.3597).abs() < 0.01, "{di}");
    assert_eq!(doc["tests"].as_array().unwrap().len(), 2);
}

#[test]
fn audit_reads_data_dir_from_environment() {
    let out = bin()
        .args(["audit", "-d", "german", "--format", "human"])
        .env("FAIRAUDIT_DATA_DIR", repo().join("data"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.7766  [0.6835, 0.8696]"), "{text}");
}

#[test]
fn config_directory_from_environment() {
    let (dir, _) = fixture(false);
    let out = bin()
        .args(["audit", "-d", "loans"])
        .env("FAIRAUDIT_CONFIG_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["dataset"], "loans");
}

#[test]
fn predictions_equal_to_labels_reproduce_data_di() {
    let (dir, cfg) = fixture(false);
    let preds = dir.path().join("preds.csv");
    fs::write(&preds, format!("decision\n{}\n", labels(&dir).join("\n"))).unwrap();
    let out = run(&[
        "audit",
        "-d",
        cfg.to_str().unwrap(),
        "--predictions",
        preds.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_valid("audit.schema.json", &doc);
    assert_eq!(doc["classifier_di"]["point"], doc["data_di"]["point"]);
    assert_eq!(doc["classifier_di"]["lower"], doc["data_di"]["lower"]);
}

#[test]
fn misaligned_predictions_are_rejected() {
    let (dir, cfg) = fixture(false);
    let preds = dir.path().join("short.csv");
    fs::write(&preds, "1\n0\n1\n").unwrap();
    let out = run(&["audit", "-d", cfg.to_str().unwrap(), "--predictions", preds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 rows"));
}

#[test]
fn undefined_metric_exits_2_naming_the_cell() {
    let (dir, cfg) = fixture(false);
    // no positive decision for group 1 (the majority)
    let preds: Vec<&str> = fs::read_to_string(dir.path().join("loans.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| if l.contains(",b,") { "1" } else { "0" })
        .collect();
    let path = dir.path().join("preds.csv");
    fs::write(&path, preds.join("\n")).unwrap();
    let out = run(&["audit", "-d", cfg.to_str().unwrap(), "--predictions", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("S=1"), "{err}");
}

#[test]
fn degenerate_training_exits_3() {
    let (_dir, cfg) = fixture(true);
    let out = run(&[
        "mitigate",
        "-d",
        cfg.to_str().unwrap(),
        "--strategy",
        "separate",
        "--seed",
        "1",
        "--k",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fold"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["audit", "-d", "adult", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["experiment", "fig3"]).status.code(), Some(1));
    assert_eq!(run(&["bootstrap-compare", "-d", "adult"]).status.code(), Some(1));
    let bad_level = run(&["audit", "-d", "no-such-config", "--level", "1.5"]);
    assert_eq!(bad_level.status.code(), Some(1));
    // flags are checked before the (missing) config is looked up
    assert!(String::from_utf8_lossy(&bad_level.stderr).contains("level"));
    assert_eq!(run(&["audit", "-d", "no-such-config"]).status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn invalid_preset_lists_valid_ones() {
    let out = run(&["experiment", "fig9", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fig3") && err.contains("fig7_bottom"), "{err}");
}

#[test]
fn too_few_replicates_rejected() {
    let out = run(&["bootstrap-compare", "-d", "adult", "--seed", "1", "-b", "50"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bootstrap_compare_is_deterministic() {
    let (_dir, cfg) = fixture(false);
    let args = ["bootstrap-compare", "-d", cfg.to_str().unwrap(), "--seed", "9", "-b", "200"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let doc = stdout_json(&a);
    assert_valid("bootstrap-compare.schema.json", &doc);
    assert_eq!(doc["bootstrap"]["replicates"], 200);
    let other = run(&["bootstrap-compare", "-d", cfg.to_str().unwrap(), "--seed", "10", "-b", "200"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn train_eval_output_files_are_identical() {
    let (dir, cfg) = fixture(false);
    let files: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}.json"))).collect();
    for f in &files {
        let out = run(&[
            "train-eval",
            "-d",
            cfg.to_str().unwrap(),
            "-m",
            "gb",
            "--k",
            "4",
            "--seed",
            "3",
            "-o",
            f.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(&files[0]).unwrap();
    assert_eq!(a, fs::read(&files[1]).unwrap());
    let doc: Value = serde_json::from_slice(&a).unwrap();
    assert_valid("experiment-report.schema.json", &doc);
    assert_eq!(doc["folds"].as_array().unwrap().len(), 4);
}

#[test]
fn train_eval_csv_is_long_format() {
    let (_dir, cfg) = fixture(false);
    let out = run(&["train-eval", "-d", cfg.to_str().unwrap(), "--k", "3", "--seed", "1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("experiment,model,strategy,sensitive,fold,metric,value\n"));
    assert!(text.contains("train-eval,LR,none,group,2,accuracy,"));
    assert!(text.contains(",ref,ref_di,"));
}

#[test]
fn saved_model_can_be_audited() {
    let (dir, cfg) = fixture(false);
    let model = dir.path().join("model.json");
    let out = run(&[
        "mitigate",
        "-d",
        cfg.to_str().unwrap(),
        "--strategy",
        "testing-compliant",
        "--k",
        "3",
        "--seed",
        "2",
        "--save-model",
        model.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_valid("mitigation.schema.json", &doc);
    assert_eq!(doc["strategy"], "testing_compliant");

    let audit = stdout_json(&run(&["audit", "-d", cfg.to_str().unwrap(), "--model", model.to_str().unwrap()]));
    assert_valid("audit.schema.json", &audit);
    assert_eq!(audit["flip_fraction"], 0.0);
    assert!(audit["classifier_di"]["point"].is_number());

    let saved: Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(saved["format_version"], 1);
    assert_eq!(saved["classifier"]["variant"], "testing_compliant");
}

#[test]
fn positive_discrimination_reports_thresholds() {
    let (_dir, cfg) = fixture(false);
    let doc = stdout_json(&run(&[
        "mitigate",
        "-d",
        cfg.to_str().unwrap(),
        "--strategy",
        "positive_discrimination",
        "--k",
        "3",
        "--seed",
        "2",
    ]));
    assert_valid("mitigation.schema.json", &doc);
    for f in doc["mitigated"]["folds"].as_array().unwrap() {
        assert!(f["thresholds"]["t0"].is_number());
        assert!(f["baseline"]["metrics"].is_object());
    }
}

#[test]
fn experiment_file_writes_json_and_csv() {
    let (dir, cfg) = fixture(false);
    let exp = dir.path().join("grid.toml");
    fs::write(
        &exp,
        format!(
            r#"
[[experiments]]
name = "grid"
dataset = "{0}"
strategy = "none"
k = 3
model = {{ family = "tree", max_depth = 3 }}

[[experiments]]
name = "grid"
dataset = "{0}"
strategy = "drop_sensitive"
k = 3
model = {{ family = "logistic" }}

[[experiments]]
name = "grid"
dataset = "missing-dataset"
strategy = "none"
model = {{ family = "logistic" }}
"#,
            cfg.display()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        exp.to_str().unwrap(),
        "--seed",
        "4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    // the failing configuration is reported but the others still run
    assert_eq!(out.status.code(), Some(1));
    let suite: Value = serde_json::from_slice(&fs::read(out_dir.join("grid.json")).unwrap()).unwrap();
    assert_valid("suite.schema.json", &suite);
    assert_eq!(suite["reports"].as_array().unwrap().len(), 2);
    assert_eq!(suite["failures"][0]["category"], "config");
    assert!(suite["reports"].as_array().unwrap().iter().all(|r| r["config"]["seed"] == 4));
    let csv = fs::read_to_string(out_dir.join("grid.csv")).unwrap();
    assert!(csv.contains("grid,DT,none,group,0,accuracy,"));
    assert!(csv.contains("grid,LR,drop_sensitive,group,mean,di,"));
}

#[test]
fn human_output_rounds_to_four_decimals() {
    let (_dir, cfg) = fixture(false);
    let out = run(&["audit", "-d", cfg.to_str().unwrap(), "--format", "human"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("data DI")).unwrap();
    let point = line.split_whitespace().nth(2).unwrap();
    assert_eq!(point.split('.').nth(1).unwrap().len(), 4, "{line}");
}
