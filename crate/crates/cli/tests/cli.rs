use std::path::Path;
use std::process::{Command, Output};

use sparsekern::dual_field::{Integrator, QuadratureSpec};
use sparsekern::AlphaField;

const REMARK1_CONFIG: &str = r#"{
  "solver": {
    "gamma": 1.0, "eta_lambda": 0.02, "eta_mu": 3.0, "iters": 5000, "mu_init": 10.0,
    "quadrature": {"center_points": 2048, "width_points": 1}
  },
  "w_lo": 0.5,
  "w_hi": 1.5
}"#;

fn sk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsekern"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field_of(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key:?} line in {out:?}"))
        .to_string()
}

fn remark1_fit(dir: &Path, out: &str) -> Output {
    std::fs::write(dir.join("cfg.json"), REMARK1_CONFIG).unwrap();
    if !dir.join("r1.csv").exists() {
        assert!(sk(dir, &["generate", "remark1", "--n", "20", "--out", "r1.csv"]).status.success());
    }
    sk(
        dir,
        &[
            "fit",
            "--data",
            "r1.csv",
            "--config",
            "cfg.json",
            "--variant",
            "fixed-width=1",
            "--epsilon",
            "1e-4",
            "--out",
            out,
        ],
    )
}

#[test]
fn remark1_fit_has_one_term_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let o = remark1_fit(dir.path(), "m.json");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field_of(&stdout(&o), "terms"), "1");
    assert!(dir.path().join("m.field.json").exists());
    let trace = std::fs::read_to_string(dir.path().join("m.trace.csv")).unwrap();
    assert!(trace.starts_with("t,g_estimate,grad_norm,max_violation"));
}

#[test]
fn refit_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert!(remark1_fit(dir.path(), "a.json").status.success());
    assert!(remark1_fit(dir.path(), "b.json").status.success());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reported_violation_matches_saved_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = remark1_fit(dir.path(), "m.json");
    let reported: f64 = field_of(&stdout(&o), "max violation").parse().unwrap();
    let text = std::fs::read_to_string(dir.path().join("m.field.json")).unwrap();
    let field: AlphaField = serde_json::from_str(&text).unwrap();
    let s = field.samples();
    let pred = field
        .predict_many(s.x(), &Integrator::Quadrature(QuadratureSpec::new(2048, 1)))
        .unwrap();
    let recomputed = pred
        .iter()
        .zip(s.y())
        .map(|(p, y)| (p - y) * (p - y) - 1e-4)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((reported - recomputed).abs() <= 1e-9, "{reported} vs {recomputed}");
}

#[test]
fn zero_gamma_reports_zero_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(sk(d, &["generate", "sin-squared", "--n", "15", "--out", "s.csv"]).status.success());
    let o = sk(d, &["fit", "--data", "s.csv", "--gamma", "0", "--iters", "20", "--out", "m.json"]);
    assert!(o.status.success());
    assert_eq!(field_of(&stdout(&o), "threshold"), "0");
}

#[test]
fn eval_mse_on_hand_built_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.json"), r#"{"terms": []}"#).unwrap();
    std::fs::write(d.join("zeros.csv"), "x1,y\n0.0,0.0\n1.0,0.0\n").unwrap();
    std::fs::write(d.join("pm.csv"), "x1,y\n0.0,1.0\n1.0,-1.0\n").unwrap();
    let mse = |model: &str, data: &str| -> f64 {
        let o = sk(d, &["eval", "--model", model, "--data", data, "--metric", "mse"]);
        assert!(o.status.success());
        stdout(&o).trim().parse().unwrap()
    };
    assert_eq!(mse("empty.json", "zeros.csv"), 0.0);
    assert_eq!(mse("empty.json", "pm.csv"), 1.0);

    // labels generated by the model itself
    std::fs::write(d.join("one.json"), r#"{"terms": [{"a": 2.0, "z": [0.5], "w": 0.5}]}"#).unwrap();
    let y = |x: f64| 2.0 * (-(x - 0.5) * (x - 0.5) / 0.5).exp();
    std::fs::write(d.join("own.csv"), format!("x1,y\n0.0,{}\n1.5,{}\n", y(0.0), y(1.5))).unwrap();
    assert!(mse("one.json", "own.csv") < 1e-30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(sk(d, &["experiment", "nope"]).status.code(), Some(2));
    std::fs::write(d.join("empty.json"), r#"{"terms": []}"#).unwrap();
    std::fs::write(d.join("z.csv"), "x1,y\n0.0,0.0\n1.0,0.0\n").unwrap();
    let o = sk(d, &["eval", "--model", "empty.json", "--data", "z.csv", "--metric", "accuracy"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sk(d, &["fit", "--data", "z.csv", "--variant", "fixed-width=9", "--iters", "5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sk(d, &["fit", "--data", "z.csv", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(sk(d, &["generate", "remark1", "--n", "20", "--out", "r.csv"]).status.success());
    let o = sk(
        d,
        &["fit", "--data", "r.csv", "--eta-lambda", "1e6", "--eta-mu", "1e6", "--iters", "300"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hinge_fit_trains_an_ovo_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("x1,label\n");
    for i in 0..30 {
        let x = i as f64 / 10.0;
        csv.push_str(&format!("{x},{}\n", (i / 10) as f64));
    }
    std::fs::write(d.join("c.csv"), csv).unwrap();
    let o = sk(
        d,
        &["fit", "--data", "c.csv", "--loss", "hinge", "--gamma", "0.01", "--iters", "300", "--out", "c.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field_of(&stdout(&o), "classes"), "3");
    let o = sk(d, &["eval", "--model", "c.json", "--data", "c.csv", "--metric", "accuracy"]);
    assert!(o.status.success());
    let acc: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let o = sk(d, &["eval", "--model", "c.json", "--data", "c.csv", "--metric", "mse"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_writes_remark1_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = sk(d, &["experiment", "remark1", "--scale", "desk", "--seed", "0", "--outdir", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(d.join("out/remark1_summary.csv")).unwrap();
    let get = |k: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(get("kernel_count"), 1.0);
    assert!(get("center_error") < 0.05);
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(sk(d, &["generate", "mixed-gauss", "--n", "40", "--seed", "3", "--out", "g.csv"]).status.success());
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_sparsekern"))
            .current_dir(d)
            .env("SPARSEKERN_THREADS", threads)
            .args(["fit", "--data", "g.csv", "--gamma", "0.5", "--iters", "200", "--integrator", "mc", "--out", out])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(d.join(out)).unwrap()
    };
    assert_eq!(run("1", "a.json"), run("3", "b.json"));
}
