use std::path::Path;
use std::process::{Command, Output};

use implicit_ray::decompose::Decomposition;
use implicit_ray::GdTrace;

const MIXED_CSV: &str = "f1,f2,label\n1,0,1\n0,1,1\n0,1,-1\n";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_implicit-ray"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn decompose_canonical_mixed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mixed.csv", MIXED_CSV);
    let out = dir.path().join("o");
    let o = bin(&["decompose", "--input", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("sep = 1") && text.contains("sc = 2"), "{text}");
    assert!(text.contains("gamma = 1.0000000000000000e0"), "{text}");
    for f in ["decomposition.json", "margin.json", "scvx.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn decompose_separable_synth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&["decompose", "--kind", "separable", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("sc = 0") && text.contains("risk_inf = 0.0000000000000000e0"), "{text}");
    assert!(!out.join("scvx.json").exists());
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let o = bin(&["decompose", "--input", &empty, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
    let zero = write(dir.path(), "zero.csv", "f1,label\n1.0,0\n");
    assert_eq!(bin(&["run", "--input", &zero, "--out", out]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--input", "/nonexistent.csv", "--out", out]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--kind", "mixed", "--loss", "hinge", "--out", out]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--kind", "mixed", "--steps", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(bin(&["report", "--out", out]).status.code(), Some(2));
}

#[test]
fn single_step_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mixed.csv", MIXED_CSV);
    let out = dir.path().join("o");
    let o = bin(&["run", "--input", &input, "--steps", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tr = GdTrace::load_json(out.join("trace.json")).unwrap();
    assert_eq!(tr.checkpoints.len(), 1);
    // w₁ = −η₀∇R(0) = −(ℓ′(0)/3) Σ A_i = (1/6, 0)
    assert!((tr.checkpoints[0].w[0] - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(tr.checkpoints[0].w[1], 0.0);
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let o = bin(&[
            "run", "--kind", "mixed", "--seed", "4", "--loss", "exponential", "--steps", "3000",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn synth_writes_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&["synth", "--kind", "touching", "--n-per-class", "7", "--seed", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d = implicit_ray::Dataset::load_csv(out.join("dataset.csv")).unwrap();
    assert_eq!(d.len(), 15);
    let direct = implicit_ray::synth(implicit_ray::SynthKind::Touching, 7, 2).unwrap();
    assert_eq!(d.to_margin_matrix().digest(), direct.to_margin_matrix().digest());
}

#[test]
fn verify_canonical_mixed_then_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mixed.csv", MIXED_CSV);
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    let o = bin(&["verify", "--input", &input, "--steps", "20000", "--out", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(out.join("report.json").exists());
    assert_eq!(bin(&["report", "--out", out_s]).status.code(), Some(0));

    // raise the risk at one checkpoint
    let path = out.join("trace.json");
    let mut tr = GdTrace::load_json(&path).unwrap();
    let k = tr.checkpoints.len() / 2;
    tr.checkpoints[k].risk *= 1.25;
    tr.save_json(&path).unwrap();
    let o = bin(&["verify", "--input", &input, "--out", out_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("smoothness"), "{}", stderr(&o));
    assert_eq!(bin(&["report", "--out", out_s]).status.code(), Some(1));
}

#[test]
fn verify_detects_swapped_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mixed.csv", MIXED_CSV);
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    assert_eq!(bin(&["decompose", "--input", &input, "--out", out_s]).status.code(), Some(0));
    let o = bin(&["verify", "--input", &input, "--steps", "2000", "--out", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let path = out.join("decomposition.json");
    let dec: Decomposition = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let a = implicit_ray::Dataset::load_csv(&input).unwrap().to_margin_matrix();
    // swap the separable row with one of the remaining rows
    let swapped = Decomposition::from_split(&a, vec![dec.sc_rows[0]], vec![dec.sep_rows[0], dec.sc_rows[1]]);
    std::fs::write(&path, serde_json::to_string(&swapped).unwrap()).unwrap();
    let o = bin(&["verify", "--input", &input, "--out", out_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("decomposition"), "{}", stderr(&o));
}

#[test]
fn verify_separable_unit_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&[
        "verify", "--kind", "separable", "--schedule", "constant_one", "--steps", "100000",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn trace_from_other_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    assert_eq!(bin(&["run", "--kind", "mixed", "--steps", "10", "--out", out_s]).status.code(), Some(0));
    let o = bin(&["verify", "--kind", "overlap", "--out", out_s]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
