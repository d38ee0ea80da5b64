use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vpc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run vpc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_sizes_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = vpc(&["generate", "--out", "four"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(d.join("four/dataset.csv")).unwrap().lines().count(), 801);
    assert!(d.join("four/dataset.json").exists());
    assert!(d.join("four/config.json").exists());

    assert_eq!(code(&vpc(&["generate", "--classes", "2", "--out", "two"], d)), 0);
    assert_eq!(fs::read_to_string(d.join("two/dataset.csv")).unwrap().lines().count(), 401);

    let again = vpc(&["generate", "--out", "again"], d);
    assert_eq!(
        fs::read(d.join("four/dataset.csv")).unwrap(),
        fs::read(d.join("again/dataset.csv")).unwrap()
    );
    let hash = |o: &Output| stdout(o).lines().find(|l| l.starts_with("dataset hash")).unwrap().to_string();
    assert_eq!(hash(&o), hash(&again));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = vpc(&["gradcheck", "--circuit", "single-stack", "--channels", "4", "--classes", "4"], d);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("max_rel_err"));
    assert_eq!(code(&vpc(&["gradcheck", "--tol", "0"], d)), 5);
    let flat = vpc(&["gradcheck", "--circuit", "threads=4 mix-even", "--out", "g"], d);
    assert_eq!(code(&flat), 0);
    assert_eq!(json(&d.join("g/gradcheck.json"))["report"]["max_rel_err"], 0.0);
    assert!(d.join("g/config.json").exists());
}

#[test]
fn train_multiclass_reports_64_params() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = vpc(&["train", "--experiment", "multiclass", "--epochs", "2", "--samples", "20", "--out", "m"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&d.join("m/report.json"));
    assert_eq!(rep["report"]["param_count"], 64);
    assert_eq!(rep["config"]["train"]["epochs"], 2);
    assert!(d.join("m/config.json").exists());
    assert_eq!(fs::read_to_string(d.join("m/loss.csv")).unwrap().lines().next(), Some("epoch,train_loss,val_loss"));
    assert_eq!(fs::read_to_string(d.join("m/confusion.csv")).unwrap().lines().count(), 4);
}

#[test]
fn deep_ablation_two_reports_of_128() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = vpc(&["train", "--experiment", "deep_ablation", "--epochs", "2", "--samples", "20", "--out", "a"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for arm in ["deep-circuit", "deep-stack"] {
        assert_eq!(json(&d.join(format!("a/{arm}/report.json")))["report"]["param_count"], 128);
    }
    let summary = json(&d.join("a/ablation.json"));
    assert_eq!(summary["rows"][0]["deep_circuit_params"], 128);
}

#[test]
fn derivative_free_is_named_in_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = vpc(
        &["train", "--experiment", "binary", "--optimizer", "derivative_free", "--max-evals", "150",
          "--epochs", "5", "--samples", "20", "--out", "b"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&d.join("b/report.json"));
    assert_eq!(rep["report"]["optimizer"], "derivative-free");
    assert_eq!(rep["report"]["evaluations"], 150);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "experiment = binary\nepochs = 4\nlr = 0.2\nsamples = 20\n").unwrap();
    let o = vpc(&["train", "--config", "run.cfg", "--epochs", "3", "--out", "p"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = json(&d.join("p/config.json"));
    assert_eq!(cfg["experiment"], "binary");
    assert_eq!(cfg["train"]["epochs"], 3);
    assert_eq!(cfg["train"]["learning_rate"], 0.2);
}

#[test]
fn train_from_file_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vpc(&["generate", "--classes", "2", "--samples", "20", "--out", "data"], d)), 0);
    let before = fs::read(d.join("data/dataset.csv")).unwrap();
    let o = vpc(&["train", "--experiment", "binary", "--data", "data/dataset.csv", "--epochs", "3", "--out", "r"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(d.join("data/dataset.csv")).unwrap(), before);

    let e = vpc(&["evaluate", "--run", "r", "--data", "data/dataset.csv", "--out", "e"], d);
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    let ev = json(&d.join("e/evaluation.json"));
    assert_eq!(ev["samples"], 40);
    assert!(d.join("e/confusion.csv").exists());
}

#[test]
fn benchmark_rows_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = vpc(&["benchmark", "--epochs", "2", "--samples", "20", "--out", "b"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.join("b/benchmark.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "model,optimizer,param_count,accuracy");
    assert!(lines[1].starts_with("single-stack,adam,64,"));
    assert!(lines[2].starts_with("deep-stack,adam,128,"));
    assert!(lines[3].starts_with("mlp(32,64,4),adam,2372,"));
    assert!(d.join("b/benchmark.txt").exists());

    let again = vpc(&["benchmark", "--epochs", "2", "--samples", "20", "--out", "b2"], d);
    assert_eq!(code(&again), 0);
    assert_eq!(csv, fs::read_to_string(d.join("b2/benchmark.csv")).unwrap());

    let multi = vpc(&["benchmark", "--epochs", "2", "--samples", "20", "--seeds", "2", "--out", "m"], d);
    assert_eq!(code(&multi), 0);
    let head = fs::read_to_string(d.join("m/benchmark.csv")).unwrap();
    assert!(head.lines().next().unwrap().ends_with("mean_pm_range"));
    assert!(d.join("m/seed-0/mlp/report.json").exists() && d.join("m/seed-1/mlp/report.json").exists());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vpc(&["train", "--epochs", "0"], d)), 2);
    assert_eq!(code(&vpc(&["train", "--optimizer", "sgd"], d)), 2);
    assert_eq!(code(&vpc(&["train", "--classes", "3"], d)), 2);
    assert_eq!(code(&vpc(&["train", "--data", "missing.csv"], d)), 3);
    assert_eq!(code(&vpc(&["train", "--config", "missing.cfg"], d)), 3);
    fs::write(d.join("bad.csv"), "label,ch0,ch1\n0,1,x\n").unwrap();
    assert_eq!(code(&vpc(&["train", "--data", "bad.csv"], d)), 3);
    fs::write(d.join("bad.cfg"), "nonsense\n").unwrap();
    assert_eq!(code(&vpc(&["train", "--config", "bad.cfg"], d)), 2);
    assert_eq!(code(&vpc(&["evaluate"], d)), 2);
    assert_eq!(code(&vpc(&["frobnicate"], d)), 2);
    let out = vpc(&["train", "--data", "missing.csv"], d);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}
