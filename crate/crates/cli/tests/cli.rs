use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use slsim_core::schema::{check_path, Document};

fn slsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slsim"))
        .args(args)
        .env_remove("SLSIM_JOBS")
        .output()
        .expect("spawn slsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn reference(dir: &Path, omega: f64, f: f64) -> PathBuf {
    config(
        dir,
        &format!(r#"{{"omega_mhz": {omega}, "f": {f}, "phi": [0, 2.0944, 4.1888], "n_shells": 6}}"#),
    )
}

#[test]
fn small_f_sign() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let o = slsim(&["chern", "--config", c.to_str().unwrap(), "--method", "small-f"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "+1");
}

#[test]
fn chern_methods_agree_at_reference_point() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    for m in ["fhs", "dp", "bessel"] {
        let o = slsim(&["chern", "--config", c.to_str().unwrap(), "--method", m]);
        assert!(o.status.success(), "{m}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o), "+1", "{m}");
    }
}

#[test]
fn degree_override() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let o = slsim(&["chern", "--config", c.to_str().unwrap(), "--method", "small-f", "--degrees", "--phi", "0,240,120"]);
    assert_eq!(stdout(&o), "-1");
}

#[test]
fn mirror_symmetric_eta_vanishes() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), r#"{"omega_mhz": 10, "f": 1.0, "phi": [0, 2.5, 2.5], "n_shells": 6}"#);
    let o = slsim(&["eta", "--config", c.to_str().unwrap(), "--delta-p", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.000000");
}

#[test]
fn dirac_file_has_satellites() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 25.0, 2.6);
    let out = d.path().join("dirac.json");
    let o = slsim(&["dirac", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let Document::Dirac(doc) = check_path(&out).unwrap() else { panic!("wrong document") };
    assert_eq!(doc.points.len(), 8);
    assert_eq!(doc.total_chirality, 0);
}

#[test]
fn outputs_pass_schema_check() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let cs = c.to_str().unwrap();
    let p = |n: &str| d.path().join(n).to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["bands", "--config", cs, "--path", "K,G,M,Kp", "--points", "20", "--out", &p("bands.csv")],
        vec!["spectrum", "--config", cs, "--delta-min", "-40", "--delta-max", "40", "--steps", "9", "--out", &p("absorption.csv")],
        vec![
            "sweep-phase", "--config", cs, "--grid", "4", "--observables", "chern_analytic_sign,min_gap,eta",
            "--out", &p("phase.json"), "--csv", &p("phase.csv"),
        ],
        vec![
            "sweep-mod", "--config", cs, "--omega", "10,25", "--f-min", "0", "--f-max", "1", "--f-steps", "2",
            "--observables", "chern_fhs,min_gap", "--fhs-grid", "24", "--out", &p("mod.json"),
        ],
        vec![
            "spectrum-vs-f", "--config", cs, "--f-min", "0", "--f-max", "1", "--f-steps", "2",
            "--delta-min", "-20", "--delta-max", "20", "--delta-steps", "5", "--out", &p("map.json"),
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for r in &runs {
        let args: Vec<&str> = r.iter().map(String::as_str).collect();
        let o = slsim(&args);
        assert!(o.status.success(), "{}: {}", r[0], String::from_utf8_lossy(&o.stderr));
    }
    let files = ["bands.csv", "absorption.csv", "phase.json", "phase.csv", "mod.json", "map.json"];
    for f in files {
        check_path(&d.path().join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
    }
    let mut args = vec!["check".to_string()];
    args.extend(files.iter().map(|f| p(f)));
    let o = slsim(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), files.len());

    let Document::Bands(b) = check_path(&d.path().join("bands.csv")).unwrap() else { panic!() };
    assert_eq!(b.len(), 61);
}

#[test]
fn sweep_output_is_deterministic_across_workers() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let mut docs = Vec::new();
    for jobs in ["1", "3"] {
        let out = d.path().join(format!("g{jobs}.json"));
        let o = slsim(&[
            "sweep-phase", "--jobs", jobs, "--config", c.to_str().unwrap(), "--grid", "6",
            "--observables", "chern_fhs,chern_analytic_sign,min_gap", "--fhs-grid", "24", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        v["meta"]["timestamp"] = serde_json::Value::Null;
        docs.push(v);
    }
    assert_eq!(docs[0], docs[1]);
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let cs = c.to_str().unwrap();
    assert_eq!(slsim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(slsim(&["chern", "--config", cs, "--bogus"]).status.code(), Some(2));
    assert_eq!(slsim(&["chern", "--config", cs, "--method", "magic"]).status.code(), Some(2));
    assert_eq!(slsim(&["chern", "--config", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(slsim(&["eta", "--config", cs, "--omega", "-1"]).status.code(), Some(2));

    let bad = config(d.path(), r#"{"omega_mhz": 10, "f": 1.0, "phi": [0, 1, 2], "colour": 3}"#);
    let o = slsim(&["chern", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("colour") && err.contains("line"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn numerical_failure_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let c = reference(d.path(), 10.0, 1.0);
    let o = slsim(&["eta", "--config", c.to_str().unwrap(), "--omega", "1e-300", "--delta-p", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
}

#[test]
fn help_and_version() {
    let v = slsim(&["--version"]);
    assert!(v.status.success());
    let text = stdout(&v);
    let ver = text.split_whitespace().last().unwrap();
    assert_eq!(ver.split('.').filter(|p| p.parse::<u32>().is_ok()).count(), 3, "{text}");
    for sub in ["bands", "dirac", "chern", "eta", "spectrum", "sweep-phase", "sweep-mod", "spectrum-vs-f", "check"] {
        let o = slsim(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
}
