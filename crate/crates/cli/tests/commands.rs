use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn dimgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimgp"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

/// A cone dataset plus a config in `dir`; `edit` adjusts the JSON.
fn config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let data = dir.join("cone.csv");
    if !data.exists() {
        let o = dimgp(&["synth", "--out", data.to_str().unwrap(), "--rows", "300"]);
        assert!(o.status.success(), "{}", text(&o));
    }
    let mut v = serde_json::json!({
        "grammar_path": fixture("higgs.grammar"),
        "transitions_path": fixture("higgs_transitions.json"),
        "dataset_path": "cone.csv",
        "evolution": {"population_size": 20, "generations": 3},
        "output_dir": "out",
    });
    edit(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn validate_accepts_the_fixture_setup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |_| {});
    let o = dimgp(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("pgggp"));
}

#[test]
fn unknown_transition_key_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"Sqrt:E": {"Frobnicate:E2": 1.0}}"#,
    )
    .unwrap();
    let cfg = config(dir.path(), |v| v["transitions_path"] = "bad.json".into());
    let o = dimgp(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn dead_type_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = fs::read_to_string(fixture("higgs.grammar")).unwrap()
        + "\ntype T \"Time\"\n<T> ::= <T> + <T> | <T> * <F>\n<F> ::= <T> / <T>\n";
    fs::write(dir.path().join("dead.grammar"), grammar).unwrap();
    let cfg = config(dir.path(), |v| v["grammar_path"] = "dead.grammar".into());
    let o = dimgp(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("dead type"), "{}", text(&o));
}

#[test]
fn missing_dataset_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| v["dataset_path"] = "nowhere.csv".into());
    let o = dimgp(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn run_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |_| {});
    let o = dimgp(&["run", "--config", cfg.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = dir.path().join("out");
    for f in [
        "report.json",
        "learning_curve.csv",
        "formulas.txt",
        "train.csv",
        "test.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["generations"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_generations_reports_the_initial_best() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| v["evolution"]["generations"] = 0.into());
    let o = dimgp(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "simple",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    let gens = report["generations"].as_array().unwrap();
    assert_eq!(gens.len(), 1);
    assert_eq!(gens[0]["hall_of_fame"], report["best_cv"]);
    assert_eq!(report["mode"], "simple");
}

#[test]
fn batch_summarizes_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| v["evolution"]["generations"] = 1.into());
    let out = dir.path().join("batch");
    let o = dimgp(&[
        "batch",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "0..3",
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["methods"].as_array().unwrap().len(), 3);
    assert_eq!(s["comparisons"].as_array().unwrap().len(), 3);
    for c in s["comparisons"].as_array().unwrap() {
        let p = c["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    assert_eq!(
        fs::read_to_string(out.join("gains.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 9
    );
    assert!(out.join("pgggp/seed_2/report.json").exists());
    assert!(out.join("learning_curve_gggp.csv").exists());
}

#[test]
fn batch_needs_two_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |_| {});
    let o = dimgp(&["batch", "--config", cfg.to_str().unwrap(), "--seeds", "5"]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn eval_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |_| {});
    let formulas = dir.path().join("f.txt");
    fs::write(&formulas, "Sqrt(Square(px) + Square(py)) / E1\n").unwrap();
    let o = dimgp(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--formulas",
        formulas.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["valid"], true);
    assert!(r["cv"].as_f64().unwrap() > r["baseline_cv"].as_f64().unwrap());

    fs::write(&formulas, "px + phi1\n").unwrap();
    let o = dimgp(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--formulas",
        formulas.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));

    let o = dimgp(&[
        "histogram",
        "--config",
        cfg.to_str().unwrap(),
        "--feature",
        "px",
        "--bins",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "bin_low,bin_high,count_class0,count_class1"
    );
    assert_eq!(csv.lines().count(), 8);
}
