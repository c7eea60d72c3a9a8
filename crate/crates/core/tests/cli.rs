use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn hdcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdcr"))
        .args(args)
        .output()
        .expect("hdcr runs")
}

fn ok(args: &[&str]) -> String {
    let out = hdcr(args);
    assert!(
        out.status.success(),
        "hdcr {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = hdcr(args);
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn schema(def: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas/hdcr.schema.json");
    let mut root: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(root["$defs"].get(def).is_some(), "no schema for {def}");
    root["$ref"] = Value::String(format!("#/$defs/{def}"));
    jsonschema::validator_for(&root).unwrap()
}

fn assert_valid(def: &str, doc: &Value) {
    let v = schema(def);
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{def}: {errors:#?}");
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn data(&self) -> String {
        self.root.join("ds").display().to_string()
    }
    fn model(&self) -> String {
        self.root.join("model.hdcv").display().to_string()
    }
    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }
}

/// Three synthetic languages trained once at D=1024 and shared by the tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let f = Fixture { _dir: dir, root };
        ok(&[
            "synth",
            "--languages",
            "3",
            "--train-len",
            "1200",
            "--sentences",
            "4",
            "--sentence-len",
            "120",
            "--out",
            &f.data(),
        ]);
        ok(&["--dim", "1024", "--out", &f.model(), "train", &f.data()]);
        f
    })
}

#[test]
fn train_writes_model_layout_and_report() {
    let f = fixture();
    let report = json(&std::fs::read_to_string(f.path("model.hdcv.train.json")).unwrap());
    assert_valid("TrainReport", &report);
    let classes = report["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 3);
    for c in classes {
        assert_eq!(c["symbols"], 1200);
        assert_eq!(c["ngrams"], 1197);
        assert!(c["energy_nj"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["config"]["engine"]["dim"], 1024);
    let layout = json(&std::fs::read_to_string(f.path("model.hdcv.layout.json")).unwrap());
    assert_valid("Layout", &layout);
    assert_eq!(layout["config_hash"], report["config_hash"]);
    assert_eq!(layout["labels"].as_array().unwrap().len(), 3);
}

#[test]
fn training_is_deterministic() {
    let f = fixture();
    let again = f.path("again.hdcv");
    let stdout = ok(&["--dim", "1024", "--json", "--out", &again, "train", &f.data()]);
    assert_valid("TrainReport", &json(&stdout));
    for suffix in ["", ".layout.json"] {
        let a = std::fs::read(format!("{}{suffix}", f.model())).unwrap();
        let b = std::fs::read(format!("{again}{suffix}")).unwrap();
        assert!(a == b, "{suffix:?} differs between runs");
    }
    // the report embeds the model path; everything else must match
    let mut a = json(&std::fs::read_to_string(f.path("model.hdcv.train.json")).unwrap());
    let mut b = json(&std::fs::read_to_string(format!("{again}.train.json")).unwrap());
    a["model"] = Value::Null;
    b["model"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn classify_recognizes_training_text() {
    let f = fixture();
    let train = Path::new(&f.data()).join("train");
    for entry in std::fs::read_dir(train).unwrap() {
        let path = entry.unwrap().path();
        let label = path.file_stem().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&path).unwrap();
        let excerpt = &text[..200];
        assert_eq!(ok(&["classify", &f.model(), "--text", excerpt]).trim(), label);
        let rec = json(&ok(&[
            "--json",
            "classify",
            &f.model(),
            "--file",
            path.to_str().unwrap(),
        ]));
        assert_valid("QueryRecord", &rec);
        assert_eq!(rec["label"], label.as_str());
        assert_eq!(rec["symbols"], 1200);
    }
}

#[test]
fn classify_reads_stdin() {
    use std::io::Write;
    let f = fixture();
    let text = std::fs::read_to_string(Path::new(&f.data()).join("train/syn00.txt")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_hdcr"))
        .args(["classify", &f.model()])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&text.as_bytes()[..300]).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "syn00");
}

#[test]
fn short_or_empty_input_is_a_precondition_failure() {
    let f = fixture();
    for text in ["", "abc"] {
        let (c, err) = code(&["classify", &f.model(), "--text", text]);
        assert_eq!(c, 3, "{text:?}: {err}");
        assert!(err.starts_with("hdcr: "), "{err}");
    }
}

#[test]
fn eval_reports_accuracy_and_agreement() {
    let f = fixture();
    let csv = f.path("eval.csv");
    let out = f.path("eval.json");
    let stdout = ok(&["--json", "--out", &out, "eval", &f.model(), &f.data(), "--csv", &csv]);
    let rep = json(&stdout);
    assert_valid("EvalReport", &rep);
    assert_eq!(rep, json(&std::fs::read_to_string(&out).unwrap()));
    assert_eq!(rep["overall"]["sentences"], 12);
    assert_eq!(rep["overall"]["agreement"], 1.0);
    assert_eq!(rep["overall"]["device_accuracy"], rep["overall"]["reference_accuracy"]);
    assert!(rep["overall"]["device_accuracy"].as_f64().unwrap() >= 0.75);
    assert_eq!(rep["params_echo"]["read_pj_per_bit"], 0.5);
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.records().count(), 12);

    let text = ok(&["eval", &f.model(), &f.data()]);
    assert!(text.contains("Sim_Check") && text.contains("overall"), "{text}");
}

#[test]
fn eval_limit_caps_sentences() {
    let f = fixture();
    let rep = json(&ok(&["--json", "eval", &f.model(), &f.data(), "--limit", "1"]));
    assert_eq!(rep["overall"]["sentences"], 3);
}

#[test]
fn missing_dataset_is_an_input_error() {
    let f = fixture();
    let (c, err) = code(&["--out", &f.path("x.hdcv"), "train", &f.path("does-not-exist")]);
    assert_eq!(c, 2);
    assert!(err.contains("does-not-exist"), "{err}");
    let (c, _) = code(&["classify", &f.path("does-not-exist.hdcv"), "--text", "hello world"]);
    assert_eq!(c, 2);
}

#[test]
fn model_parameters_cannot_be_overridden() {
    let f = fixture();
    let (c, err) = code(&["--dim", "2048", "classify", &f.model(), "--text", "hello world"]);
    assert_eq!(c, 2, "{err}");
    let (c, _) = code(&["--ngram", "3", "classify", &f.model(), "--text", "hello world"]);
    assert_eq!(c, 2);
    // agreeing values are accepted
    ok(&[
        "--dim",
        "1024",
        "--seed",
        "0",
        "classify",
        &f.model(),
        "--text",
        "hello world",
    ]);
}

#[test]
fn more_pgs_at_query_time_agree() {
    let f = fixture();
    let text = std::fs::read_to_string(Path::new(&f.data()).join("test/syn01.txt")).unwrap();
    let line = text.lines().next().unwrap();
    let a = json(&ok(&["--json", "classify", &f.model(), "--text", line]));
    let b = json(&ok(&["--json", "--pgs", "3", "classify", &f.model(), "--text", line]));
    assert_eq!(a["distances"], b["distances"]);
}

#[test]
fn config_files_are_validated() {
    let f = fixture();
    let bad_energy = f.path("neg.json");
    std::fs::write(&bad_energy, r#"{"energy": {"read_pj_per_bit": -1.0}}"#).unwrap();
    assert_eq!(code(&["--config", &bad_energy, "selftest", "--quick"]).0, 2);
    let unknown = f.path("unknown.json");
    std::fs::write(&unknown, r#"{"engine": {"dimension": 1024}}"#).unwrap();
    assert_eq!(code(&["--config", &unknown, "cost"]).0, 2);
    let good = f.path("good.json");
    std::fs::write(&good, r#"{"energy": {"background_mw": 0.0}}"#).unwrap();
    let rep = json(&ok(&[
        "--json",
        "--config",
        &good,
        "cost",
        "--classes",
        "2",
        "--length",
        "40",
    ]));
    assert_valid("CostReport", &rep);
    assert_eq!(rep["query"]["background_nj"], 0.0);
}

#[test]
fn selftest_quick_passes() {
    let rep = json(&ok(&["--json", "--quick", "selftest"]));
    assert_valid("SelftestReport", &rep);
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn cost_report_splits_energy() {
    let rep = json(&ok(&[
        "--json",
        "--dim",
        "1024",
        "cost",
        "--classes",
        "3",
        "--length",
        "60",
    ]));
    assert_valid("CostReport", &rep);
    let q = &rep["query"];
    let sum = q["encoder_nj"].as_f64().unwrap() + q["simcheck_nj"].as_f64().unwrap() + q["io_nj"].as_f64().unwrap();
    assert!((sum - q["total_nj"].as_f64().unwrap()).abs() < 1e-6);
    assert_eq!(rep["symbols"], 60);
}

#[test]
fn trace_runs_and_reports() {
    let f = fixture();
    let path = f.path("t.trace");
    std::fs::write(
        &path,
        "WRITE 0.0.15.0 0 ones\nWRITE 0.0.15.0 1 zeros\nPHASE search\nCIMOP 0.0.15.0 0 2 OR\nREAD 0.0.15.0 1\n",
    )
    .unwrap();
    let rep = json(&ok(&["--json", "trace", &path]));
    assert_valid("TraceReport", &rep);
    let ops = rep["ops"].as_array().unwrap();
    assert_eq!(ops.len(), 5);
    assert_eq!(ops[3]["ones"], 512);
    assert_eq!(ops[4]["ones"], 0);
    assert!(rep["report"]["phases"]["search"]["events"]["tr_bits"].as_u64().unwrap() > 0);

    std::fs::write(&path, "WRITE 0.0.15.0 0 ones\nNOPE\n").unwrap();
    let (c, err) = code(&["trace", &path]);
    assert_eq!(c, 2);
    assert!(err.contains("line 2"), "{err}");
    std::fs::write(&path, "CIMOP 0.0.0.0 0 2 OR\n").unwrap();
    assert_eq!(code(&["trace", &path]).0, 3);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(code(&["frobnicate"]).0, 2);
    assert_eq!(code(&["synth"]).0, 2);
    assert_eq!(code(&["--mode", "sideways", "cost"]).0, 2);
}
