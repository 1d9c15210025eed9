use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cvham(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvham")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_model(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const ILLUSTRATIVE: &str = include_str!("../../core/catalog/illustrative.ham");

#[test]
fn list_shows_catalog() {
    let o = cvham(&["list"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for name in ["illustrative", "ramsey", "ak"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn derive_illustrative() {
    let o = cvham(&["derive", "illustrative"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("5 operator(s)"), "{out}");
    assert!(out.contains("independence rank 2"), "{out}");
    assert!(out.contains("X4: xi = 0; eta = exp(t); B = exp(t) + 4*q*exp(t)"), "{out}");
}

#[test]
fn verify_all_models() {
    for m in ["illustrative", "ramsey", "ak"] {
        let o = cvham(&["verify", m]);
        assert_eq!(code(&o), 0, "{m}: {}", stdout(&o));
        assert!(stdout(&o).contains("all declared objects verified"));
    }
}

#[test]
fn restrict_ramsey() {
    let o = cvham(&["restrict", "ramsey", "--param", "sigma", "--lo", "1.5", "--hi", "20"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("(= 20/3)"), "{}", stdout(&o));
}

#[test]
fn solve_ak() {
    let o = cvham(&["solve", "ak"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("c(t) = c0*exp(t/200)"), "{out}");
    assert!(out.contains("transversality forces a1 = 0"), "{out}");
    assert!(out.contains("k(0) = 1 gives c0 = 11/200"), "{out}");
}

#[test]
fn solve_with_constants() {
    let o = cvham(&["solve", "illustrative", "--constants", "A1=0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = cvham(&["solve", "illustrative", "--constants", "A1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let csv = dir.path().join("csv");
    let run = || {
        let o = cvham(&["report", "ramsey", "--out", a.to_str().unwrap(), "--no-meta", "--csv", csv.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        fs::read_to_string(&a).unwrap()
    };
    let ta = run();
    assert_eq!(ta, run());
    let v: serde_json::Value = serde_json::from_str(&ta).unwrap();
    assert_eq!(v["schema"], 1);
    assert!(v.get("meta").is_none());
    assert!(csv.join("ramsey_verify.csv").exists());
    assert!(csv.join("ramsey_solution.csv").exists());

    let o = cvham(&["report", "ak", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&a).unwrap()).unwrap();
    assert!(v["meta"]["timings_ms"].is_object() || v["meta"]["timings_ms"].is_array());
}

#[test]
fn model_files_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "m.ham", ILLUSTRATIVE);
    let o = cvham(&["verify", &path]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&cvham(&["derive", "nosuchmodel"])), 2);
    assert_eq!(code(&cvham(&["verify", "illustrative", "--q0", "1"])), 2);
    assert_eq!(code(&cvham(&["frobnicate"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = write_model(dir.path(), "bad.ham", "model m\ntime t\nstate q\nhamiltonian = q +\n");
    let o = cvham(&["derive", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    // beta*sigma = 1 violates the guard
    let ramsey = include_str!("../../core/catalog/ramsey.ham").replace("param sigma\n", "param sigma = 10/3\n");
    let path = write_model(dir.path(), "r.ham", &ramsey);
    let o = cvham(&["derive", &path]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
}

#[test]
fn failed_verification_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let body = ILLUSTRATIVE.replace(
        "integral I4 = -2*(2*q - u)*exp(t)",
        "integral I4 = -2*(2*q - u)*exp(t) + q",
    );
    assert_ne!(body, ILLUSTRATIVE);
    let path = write_model(dir.path(), "m.ham", &body);
    let o = cvham(&["verify", &path]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}
