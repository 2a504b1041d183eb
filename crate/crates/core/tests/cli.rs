use std::path::Path;
use std::process::Command;

use lt_core::order::ConeCertificate;
use lt_core::sampling;
use lt_core::tensorspace::{random_decomposition, Decomposition};
use lt_core::{CMatrix, LambdaSequence};
use serde_json::{json, Value};

fn lt(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lt")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn axioms_kronecker_from_file_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "kron.json", &json!({"kind": "kronecker", "arity": 2}));
    let (code, out, _) = lt(&["axioms", "--lambda", &spec, "--levels", "3"]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["schema"], "lt-report/1");
    assert_eq!(r["status"], "pass");
}

#[test]
fn axioms_matprod_reports_o1_counterexample() {
    let (code, out, _) = lt(&["axioms", "--lambda", "matprod:2"]);
    assert_eq!(code, 1);
    let r: Value = serde_json::from_str(&out).unwrap();
    let o1 = r["result"]["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["condition"] == "O1" && c["params"]["r"] == 2)
        .unwrap();
    assert_eq!(o1["verdict"], "fail");
    assert_eq!(o1["counterexample"]["units"], json!([[1, 2], [2, 1]]));
    assert_eq!(o1["counterexample"]["residual"], json!(1.0));
}

#[test]
fn norm_sandwich_report() {
    let dir = tempfile::tempdir().unwrap();
    let l = LambdaSequence::schur(2).unwrap();
    let mut rng = sampling::rng(2);
    let d = random_decomposition(&mut rng, &l, 2, 2, &[2, 1]).unwrap();
    let mut d2 = d.clone();
    d2.alpha = d2.alpha.scale_real(3.0);
    d2.beta = d2.beta.scale_real(1.0 / 3.0);
    let input = write(dir.path(), "c.json", &json!({"candidates": [d, d2]}));
    let (code, out, _) = lt(&["norm", "--lambda", "schur:2", "--input", &input]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert!(r["result"]["min_norm"].as_f64().unwrap() <= r["result"]["upper_bound"].as_f64().unwrap() + 1e-9);
}

#[test]
fn cone_and_ossys_commands() {
    let dir = tempfile::tempdir().unwrap();
    let l = LambdaSequence::kronecker(2).unwrap();
    let mut rng = sampling::rng(5);
    let certs: Vec<ConeCertificate> = (1..=2)
        .map(|j| {
            let a = sampling::gaussian(&mut rng, 1, l.tau(j));
            let f = vec![sampling::wishart(&mut rng, 2 * j, 2), sampling::wishart(&mut rng, 2 * j, 1)];
            ConeCertificate::new(j, a, f).unwrap()
        })
        .collect();
    let input = write(dir.path(), "cone.json", &json!({"certificates": certs}));
    let (code, out, err) = lt(&["cone", "--lambda", "kronecker:2", "--input", &input]);
    assert_eq!(code, 0, "{out}{err}");

    let a = sampling::gaussian(&mut rng, 1, 4);
    let x = sampling::self_adjoint(&mut rng, 4);
    let d = Decomposition::new(2, a.clone(), vec![x.clone(), x], a.adjoint()).unwrap();
    let input = write(dir.path(), "os.json", &json!({"elements": [d]}));
    let (code, out, err) = lt(&["ossys", "--lambda", "kronecker:2", "--input", &input]);
    assert_eq!(code, 0, "{out}{err}");

    let bad = CMatrix::from_real(2, 2, &[0., 1., 0., 0.]).unwrap();
    let d = Decomposition::elementary(&[bad, CMatrix::identity(1)]).unwrap();
    let input = write(dir.path(), "bad.json", &json!({"elements": [d]}));
    let (code, _, err) = lt(&["ossys", "--lambda", "kronecker:2", "--input", &input]);
    assert_eq!(code, 2);
    assert!(err.contains("self-adjoint"));
}

#[test]
fn algebra_random_pairs_and_refused_involution() {
    let (code, out, _) = lt(&["algebra", "--lambda", "matprod:2", "--trials", "10"]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert!(r["result"]["involution_refused"].is_string());
    let (code, _, _) = lt(&["algebra", "--lambda", "kronecker:2", "--trials", "10"]);
    assert_eq!(code, 0);
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\"kind\": \"kronecker\", ").unwrap();
    let (code, _, err) = lt(&["axioms", "--lambda", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"), "{err}");
    assert_eq!(lt(&["axioms"]).0, 2);
    assert_eq!(lt(&["axioms", "--lambda", "kronecker:2", "--tol", "0"]).0, 2);
    assert_eq!(lt(&["norm", "--lambda", "kronecker:2"]).0, 2);
}

#[test]
fn reports_are_deterministic_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let (code, _, _) = lt(&["axioms", "--lambda", "schur:2", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 1);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}
