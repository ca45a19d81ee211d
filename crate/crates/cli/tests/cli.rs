use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qrem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrem"))
        .args(args)
        .env_remove("QREM_THREADS")
        .env_remove("QREM_SUBSPACE_CAP")
        .output()
        .expect("spawn qrem")
}

fn ok(args: &[&str]) -> String {
    let out = qrem(args);
    assert!(
        out.status.success(),
        "qrem {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(name: &str, value: &Value) {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("schemas/{name}.schema.json"));
    let schema = read(&file);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn write(&self, name: &str, value: &Value) -> String {
        std::fs::write(self.path(name), value.to_string()).unwrap();
        self.arg(name)
    }
}

#[test]
fn identity_calibration_leaves_counts_unchanged() {
    let f = Fixture::new();
    let counts = f.write(
        "counts.json",
        &serde_json::json!({"width": 4, "counts": {"0000": 30, "0110": 50, "1111": 20}}),
    );
    let cal = f.arg("cal.json");
    ok(&["calibrate-synth", "--n", "4", "--per-qubit", "0:0,0:0,0:0,0:0", "--out", &cal]);
    assert_schema("calibration", &read(&f.path("cal.json")));

    let out = f.arg("out.json");
    ok(&["mitigate", "--counts", &counts, "--calibration", &cal, "--out", &out]);
    let v = read(&f.path("out.json"));
    assert_schema("distribution", &v);
    assert_eq!(v["shots"], 100);
    let counts = v["counts"].as_object().expect("counts survive an identity model");
    assert_eq!(counts.len(), 3);
    for (k, want) in [("0000", 30.0), ("0110", 50.0), ("1111", 20.0)] {
        assert!((counts[k].as_f64().unwrap() - want).abs() < 1e-9, "{k}");
    }
}

#[test]
fn report_error_bar_follows_overhead_and_shots() {
    let f = Fixture::new();
    let cal = f.arg("cal.json");
    let counts = f.arg("ghz.json");
    let report = f.arg("report.json");
    ok(&["calibrate-synth", "--n", "10", "--p01", "0.03", "--p10", "0.03", "--out", &cal]);
    ok(&[
        "ghz-sim", "--n", "10", "--shots", "8192", "--seed", "3", "--noise-p01", "0.03", "--noise-p10", "0.03",
        "--out", &counts,
    ]);
    assert_schema("distribution", &read(&f.path("ghz.json")));
    ok(&["mitigate", "--counts", &counts, "--calibration", &cal, "--report", &report, "--out", &f.arg("m.json")]);
    let r = read(&f.path("report.json"));
    assert_schema("mitigation-report", &r);
    let m = r["overhead"].as_f64().unwrap();
    assert!(m > 1.0);
    assert!((r["sigma"].as_f64().unwrap() - (m / 8192.0).sqrt()).abs() < 1e-12);
    assert!((r["corrected_sum"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_input_and_cap_errors() {
    let f = Fixture::new();
    let cal = f.arg("cal.json");
    ok(&["calibrate-synth", "--n", "3", "--out", &cal]);
    let missing = qrem(&["mitigate", "--counts", &f.arg("missing.json"), "--calibration", &cal]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));

    let bad_flag = qrem(&["mitigate", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let counts = f.write(
        "c.json",
        &serde_json::json!({"width": 3, "counts": {"000": 5, "001": 3, "111": 2}}),
    );
    let capped = qrem(&["--subspace-cap", "2", "mitigate", "--counts", &counts, "--calibration", &cal]);
    assert_eq!(capped.status.code(), Some(3));

    let wrong_width = f.write("w.json", &serde_json::json!({"width": 4, "counts": {"0000": 1}}));
    let mismatch = qrem(&["mitigate", "--counts", &wrong_width, "--calibration", &cal]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn singular_calibration_is_a_numerical_error() {
    let f = Fixture::new();
    let cal = f.write(
        "cal.json",
        &serde_json::json!({"width": 1, "blocks": [{"qubits": [0], "matrix": [[0.5, 0.5], [0.5, 0.5]]}]}),
    );
    let counts = f.write("c.json", &serde_json::json!({"width": 1, "counts": {"0": 5}}));
    let out = qrem(&["mitigate", "--counts", &counts, "--calibration", &cal]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn noiseless_mqc_gives_unit_fidelity() {
    let f = Fixture::new();
    let dir = f.arg("mqc");
    ok(&["mqc-sim", "--n", "4", "--shots", "0", "--out-dir", &dir]);
    let manifest = f.path("mqc/manifest.json");
    assert_schema("mqc-manifest", &read(&manifest));
    let out = ok(&["fidelity", "--manifest", manifest.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_schema("fidelity", &v);
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{v}");
    assert!((v["coherence"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn mqc_rejects_too_few_angles() {
    let f = Fixture::new();
    let out = qrem(&["mqc-sim", "--n", "4", "--angles", "9", "--out-dir", &f.arg("mqc")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mitigated_mqc_beats_raw() {
    let f = Fixture::new();
    let dir = f.arg("mqc");
    let cal = f.arg("cal.json");
    ok(&["calibrate-synth", "--n", "4", "--p01", "0.05", "--p10", "0.05", "--out", &cal]);
    ok(&["mqc-sim", "--n", "4", "--shots", "0", "--noise-p01", "0.05", "--noise-p10", "0.05", "--out-dir", &dir]);
    let manifest = f.arg("mqc/manifest.json");
    let raw: Value = serde_json::from_str(&ok(&["fidelity", "--manifest", &manifest])).unwrap();
    let mit: Value =
        serde_json::from_str(&ok(&["fidelity", "--manifest", &manifest, "--calibration", &cal])).unwrap();
    assert!(raw["fidelity"].as_f64().unwrap() < 0.9);
    assert!((mit["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{mit}");
}

#[test]
fn expval_conventions_differ_by_the_element_sum() {
    let f = Fixture::new();
    let cal = f.arg("cal.json");
    let counts = f.arg("ghz.json");
    ok(&["calibrate-synth", "--n", "6", "--p01", "0.04", "--p10", "0.02", "--out", &cal]);
    ok(&["ghz-sim", "--n", "6", "--shots", "4000", "--noise-p01", "0.04", "--noise-p10", "0.02", "--out", &counts]);
    let run = |convention: &str| -> Value {
        let out = ok(&[
            "expval", "--counts", &counts, "--calibration", &cal, "--method", "proposed-delta", "--convention",
            convention,
        ]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_schema("expval", &v);
        v
    };
    let norm = run("normalized");
    let raw = run("raw");
    let sum = raw["element_sum"].as_f64().unwrap();
    assert!((sum - 1.0).abs() > 1e-6, "delta output should not be unit-sum");
    let want = norm["value"].as_f64().unwrap() * sum;
    assert!((raw["value"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn seeded_simulation_is_reproducible() {
    let args = ["ghz-sim", "--n", "12", "--shots", "2000", "--seed", "42", "--noise-p01", "0.02", "--noise-p10", "0.01"];
    assert_eq!(ok(&args), ok(&args));
    let mut other = args;
    other[6] = "43";
    assert_ne!(ok(&args), ok(&other));
}

#[test]
fn grover_readout_reports_its_angle() {
    let out = ok(&["grover-sim", "--n", "6", "--m", "3", "--shots", "0", "--residual", "8"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_schema("distribution", &v);
    let want = v["meta"]["ideal_zero_probability"].as_f64().unwrap();
    let zero = v["probs"]["0000000"].as_f64().unwrap_or(0.0);
    assert!((zero - want).abs() < 1e-12);
}

#[test]
fn small_mlae_run_writes_report_and_table() {
    let f = Fixture::new();
    let out = f.arg("mlae.json");
    let csv = f.arg("mlae.csv");
    ok(&[
        "mlae-sim", "--n", "4", "--iterations", "1,2,4", "--shots", "50", "--trials", "3", "--noise", "0,0.03",
        "--method", "raw,proposed,rigorous,mooney:0.001", "--residual", "8", "--grid", "2000", "--out", &out,
        "--csv", &csv,
    ]);
    let v = read(&f.path("mlae.json"));
    assert_schema("mlae-report", &v);
    assert_eq!(v["curves"].as_array().unwrap().len(), 8);
    let table = std::fs::read_to_string(f.path("mlae.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("noise,method,m,queries"));
    assert_eq!(lines.count(), 8 * 3);
}

#[test]
fn bench_writes_one_row_per_feasible_size() {
    let f = Fixture::new();
    let csv = f.arg("bench.csv");
    ok(&["bench", "--qubits", "6,30", "--sizes", "16,128", "--csv", &csv]);
    let table = std::fs::read_to_string(f.path("bench.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert!(rows[0].starts_with("n,subspace,correction,mode,threads"));
    // 128 > 2^6 is skipped.
    assert_eq!(rows.len(), 1 + 3);
    let first: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(first[0], "6");
    assert!(!first.last().unwrap().is_empty(), "rigorous timing expected at n = 6");
    assert!(rows[3].ends_with(','), "no rigorous timing at n = 30");
}
