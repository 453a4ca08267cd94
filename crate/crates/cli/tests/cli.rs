use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rff"))
        .args(args)
        .env_remove("RFF_MAX_N")
        .output()
        .expect("spawn rff")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn matrix_json(rows: usize, entries: &[(usize, usize, f64, f64)]) -> String {
    let mut data = vec![[0.0f64, 0.0]; rows * rows];
    for &(i, j, re, im) in entries {
        data[i * rows + j] = [re, im];
    }
    serde_json::json!({ "rows": rows, "cols": rows, "data": data }).to_string()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn census_n4() {
    let o = rff(&["census", "--n", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    let sectors: Vec<(String, u64)> = v["sectors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["j"].as_str().unwrap().to_string(), r["multiplicity"].as_u64().unwrap()))
        .collect();
    assert_eq!(
        sectors,
        vec![("2".into(), 1), ("1".into(), 3), ("0".into(), 2)]
    );
    assert_eq!(v["total_dimension"], 16);
    assert_eq!(v["agrees"], true);
}

#[test]
fn census_n2_csv() {
    let o = rff(&["census", "--n", "2", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text,
        "j,multiplicity,dimension,eigen_count,agrees\n1,1,3,3,true\n0,1,1,1,true\n"
    );
}

#[test]
fn census_rejects_n_above_limit() {
    let o = rff(&["census", "--n", "13"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--n"), "{}", stderr(&o));
}

#[test]
fn max_n_out_of_range_is_usage_error() {
    assert_eq!(code(&rff(&["--max-n", "15", "census", "--n", "3"])), 2);
    assert_eq!(code(&rff(&["--tol", "0", "census", "--n", "3"])), 2);
    assert_eq!(code(&rff(&["census"])), 2);
}

#[test]
fn basis_n3_keys_and_residuals() {
    let o = rff(&["basis", "--n", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["d"], 2);
    assert_eq!(v["j2"], "1/2");
    let kets = v["kets"].as_object().unwrap();
    assert_eq!(kets.keys().collect::<Vec<_>>(), ["lambda=1", "lambda=2"]);
    let inner = kets["lambda=1"].as_object().unwrap();
    assert_eq!(inner.keys().collect::<Vec<_>>(), ["m2=1/2", "m2=-1/2"]);
    assert_eq!(inner["m2=1/2"].as_array().unwrap().len(), 8);
    for key in ["orthonormality_residual", "j_squared_residual", "jz_residual"] {
        assert!(v[key].as_f64().unwrap() < 1e-12, "{key}");
    }
}

#[test]
fn basis_with_coupling_file() {
    let dir = TempDir::new().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let inv3 = 1.0 / 3f64.sqrt();
    // Rows 1 and 2 orthogonal to each other and to the uniform last row.
    let a = 1.0 / 2f64.sqrt();
    let b = 1.0 / 6f64.sqrt();
    let good = matrix_json(
        3,
        &[
            (0, 0, a, 0.0),
            (0, 1, -a, 0.0),
            (1, 0, b, 0.0),
            (1, 1, b, 0.0),
            (1, 2, -2.0 * b, 0.0),
            (2, 0, inv3, 0.0),
            (2, 1, inv3, 0.0),
            (2, 2, inv3, 0.0),
        ],
    );
    let p = write(dir.path(), "c.json", &good);
    let o = rff(&["basis", "--n", "3", "--coupling", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let bad = matrix_json(3, &[(0, 0, h, 0.0), (1, 1, h, 0.0), (2, 2, 1.0, 0.0)]);
    let p = write(dir.path(), "bad.json", &bad);
    let o = rff(&["basis", "--n", "3", "--coupling", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unitary") || stderr(&o).contains("last row"), "{}", stderr(&o));

    let o = rff(&["basis", "--n", "3", "--coupling", "/nonexistent/c.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn encode_pure_qutrit_and_mixed_qubit() {
    let dir = TempDir::new().unwrap();
    let rho = write(dir.path(), "r.json", &matrix_json(3, &[(0, 0, 1.0, 0.0)]));
    let o = rff(&["encode", "--n", "4", "--state", s(&rho)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["state"]["metadata"]["n"], 4);
    assert_eq!(v["state"]["metadata"]["d"], 3);
    assert_eq!(v["state"]["metadata"]["kind"], "state");
    assert_eq!(v["state"]["payload"]["rows"], 16);
    let e = &v["entropy"];
    assert!(e["s_logical"].as_f64().unwrap().abs() < 1e-10);
    assert!((e["s_encoded"].as_f64().unwrap() - 3f64.log2()).abs() < 1e-10);

    let mix = write(dir.path(), "m.json", &matrix_json(2, &[(0, 0, 0.5, 0.0), (1, 1, 0.5, 0.0)]));
    let povm = write(
        dir.path(),
        "p.json",
        &format!(
            "[{},{}]",
            matrix_json(2, &[(0, 0, 1.0, 0.0)]),
            matrix_json(2, &[(1, 1, 1.0, 0.0)])
        ),
    );
    let o = rff(&["encode", "--n", "3", "--state", s(&mix), "--povm", s(&povm)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["entropy"]["s_encoded"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    let table = v["born_table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    for row in table {
        assert!((row["encoded"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(row["agrees"], true);
    }
    assert_eq!(v["povm"][0]["metadata"]["kind"], "povm-element");
}

#[test]
fn encode_rejects_invalid_states() {
    let dir = TempDir::new().unwrap();
    let neg = write(dir.path(), "n.json", &matrix_json(2, &[(0, 0, 1.5, 0.0), (1, 1, -0.5, 0.0)]));
    let o = rff(&["encode", "--n", "3", "--state", s(&neg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("positive semidefinite"), "{}", stderr(&o));

    let wrong_d = write(dir.path(), "w.json", &matrix_json(3, &[(0, 0, 1.0, 0.0)]));
    assert_eq!(code(&rff(&["encode", "--n", "3", "--state", s(&wrong_d)])), 2);

    let garbage = write(dir.path(), "g.json", "not json");
    assert_eq!(code(&rff(&["encode", "--n", "3", "--state", s(&garbage)])), 2);
}

#[test]
fn verify_passes_on_default_range() {
    let o = rff(&["verify", "--n-range", "3..5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() > 50);
}

#[test]
fn verify_single_suite_and_bad_range() {
    let o = rff(&["verify", "--suite", "hws", "--n-range", "3..4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["id"].as_str().unwrap().starts_with("hws/")));
    assert_eq!(code(&rff(&["verify", "--n-range", "5..3"])), 2);
    assert_eq!(code(&rff(&["verify", "--suite", "nope"])), 2);
}

#[test]
fn corrupted_reference_fails_with_check_id() {
    let dir = TempDir::new().unwrap();
    let o = rff(&["reference", "--case", "n4-q"]);
    let v = stdout_json(&o);
    let q22 = v["matrices"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["name"] == "Q22")
        .unwrap()["matrix"]
        .clone();
    let mut corrupted = q22.clone();
    let first = corrupted["data"][0][0].as_f64().unwrap();
    corrupted["data"][0][0] = Value::from(first + 1e-3);
    let p = write(dir.path(), "q22.json", &corrupted.to_string());
    let arg = format!("n4-q:Q22={}", s(&p));
    let o = rff(&["verify", "--suite", "reference", "--override-reference", &arg]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("reference/n4-q/Q22 "), "{err}");
    assert!(err.contains("residual="), "{err}");

    // Untouched override passes.
    let p = write(dir.path(), "same.json", &q22.to_string());
    let arg = format!("n4-q:Q22={}", s(&p));
    let o = rff(&["verify", "--suite", "reference", "--override-reference", &arg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = rff(&["verify", "--override-reference", "n4-q:Q99=/dev/null"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn channel_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let plus = write(
        dir.path(),
        "plus.json",
        &matrix_json(2, &[(0, 0, 0.5, 0.0), (0, 1, 0.5, 0.0), (1, 0, 0.5, 0.0), (1, 1, 0.5, 0.0)]),
    );
    let args = ["channel", "--n", "3", "--state", s(&plus), "--trials", "20", "--seed", "7"];
    let a = rff(&args);
    let b = rff(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["per_trial"].as_array().unwrap().len(), 20);
    assert!((v["aggregate"]["min"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(v["max_leakage"].as_f64().unwrap() < 1e-10);

    let other = rff(&["channel", "--n", "3", "--state", s(&plus), "--trials", "20", "--seed", "8"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn channel_csv_and_single_trial() {
    let dir = TempDir::new().unwrap();
    let rho = write(dir.path(), "r.json", &matrix_json(2, &[(0, 0, 1.0, 0.0)]));
    let out = dir.path().join("out.csv");
    let o = rff(&[
        "channel", "--n", "3", "--state", s(&rho), "--trials", "1", "--noise", "fixed", "--axis", "1,1,0",
        "--angle", "0.7", "--format", "csv", "--output", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trial,fidelity,trace_distance,bare_fidelity,leakage");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    assert!((row[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
    assert!(lines.next().is_none());

    let o = rff(&["channel", "--n", "3", "--state", s(&rho), "--trials", "0"]);
    assert_eq!(code(&o), 2);
    let o = rff(&["channel", "--n", "3", "--state", s(&rho), "--noise", "fixed", "--axis", "0,0,0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reference_cases() {
    for (id, names) in [
        ("n3-q", vec!["Q12", "Q21", "Q11", "Q22"]),
        ("n4-hws", vec!["U3", "V3"]),
        ("n4-sector-projectors", vec!["I_j2", "I_j1", "I_j0"]),
    ] {
        let o = rff(&["reference", "--case", id]);
        assert_eq!(code(&o), 0, "{id}: {}", stderr(&o));
        let v = stdout_json(&o);
        assert_eq!(v["id"], id);
        let got: Vec<&str> = v["matrices"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["name"].as_str().unwrap())
            .collect();
        assert_eq!(got, names, "{id}");
    }
    let o = rff(&["reference", "--case", "n9-q"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n4-akl"), "{}", stderr(&o));
}

#[test]
fn json_output_reemits_identically() {
    for args in [
        vec!["reference", "--case", "n4-q"],
        vec!["basis", "--n", "4"],
        vec!["verify", "--n-range", "3..3"],
    ] {
        let o = rff(&args);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        let parsed: Value = rff_core::io::from_json_str(&text).unwrap();
        assert_eq!(rff_core::io::to_json_string(&parsed).unwrap(), text, "{args:?}");
    }
}
