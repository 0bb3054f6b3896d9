use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn ocq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocq"))
        .args(args)
        .env_remove("OCQ_FIXTURES")
        .output()
        .expect("binary runs")
}

fn ocq_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ocq"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn constant_term(c: &Value) -> (&Value, &str) {
    (&c[0]["v"], c[0]["u"].as_str().unwrap())
}

fn sigma3_prime_to_5(n: u64) -> u64 {
    (1..=n)
        .filter(|d| n.is_multiple_of(*d) && d % 5 != 0)
        .map(|d| d.pow(3))
        .sum()
}

#[test]
fn depleted_eisenstein_family_matches_divisor_sums() {
    let doc = json(&ocq(&[
        "qexp",
        "--eisenstein",
        "4",
        "--deplete",
        "--prec-q",
        "30",
    ]));
    assert_eq!(doc["context"]["p"], 5);
    assert_eq!(doc["qexp"]["Q"], 30);
    let coeffs = doc["qexp"]["coeffs"].as_array().unwrap();
    assert_eq!(coeffs.len(), 31);
    let modulus = 5u64.pow(12);
    for (n, c) in coeffs.iter().enumerate() {
        let (v, u) = constant_term(c);
        if n % 5 == 0 {
            assert_eq!(v, "inf", "a_{n}");
            continue;
        }
        // v = 0 with unit part sigma*_3(n) mod 5^12 at T = 0.
        let expected = sigma3_prime_to_5(n as u64) % modulus;
        let val = v.as_i64().unwrap();
        let got = u.parse::<u64>().unwrap() * 5u64.pow(val as u32) % modulus;
        assert_eq!(got, expected, "a_{n}");
    }
}

#[test]
fn qexp_round_trips_through_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("delta.json");
    let first = ocq(&["qexp", "--delta", "--prec-q", "40"]);
    fs::write(&path, &first.stdout).unwrap();
    let again = ocq(&["qexp", "--input", path.to_str().unwrap(), "--prec-q", "40"]);
    assert_eq!(json(&first), json(&again));
    assert_eq!(first.stdout, again.stdout);
    let piped = ocq_stdin(
        &["qexp", "--input", "-"],
        &String::from_utf8(first.stdout).unwrap(),
    );
    assert_eq!(json(&piped), json(&again));
}

#[test]
fn u_after_v_is_identity_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e4.json");
    let e4 = ocq(&["qexp", "--eisenstein", "4", "--prec-q", "50"]);
    fs::write(&path, &e4.stdout).unwrap();
    let v = ocq(&["qexp", "--input", path.to_str().unwrap(), "--v"]);
    fs::write(&path, &v.stdout).unwrap();
    let uv = json(&ocq(&["qexp", "--input", path.to_str().unwrap(), "--u"]));
    let truncated = json(&ocq(&["qexp", "--eisenstein", "4", "--prec-q", "10"]));
    assert_eq!(uv, truncated);
}

#[test]
fn identical_invocations_are_byte_identical() {
    for args in [
        vec![
            "qexp",
            "--eisenstein",
            "6",
            "--deplete",
            "--twist",
            "2",
            "--prec-q",
            "60",
        ],
        vec!["selftest", "--seed", "11", "--jobs", "3"],
        vec![
            "euler", "--f", "Delta", "--g", "E4", "--h", "E6", "--t", "1",
        ],
    ] {
        let a = ocq(&args);
        let b = ocq(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn selftest_passes_and_is_independent_of_jobs() {
    let one = json(&ocq(&["selftest", "--seed", "3"]));
    assert_eq!(one["pass"], true, "{one:#}");
    assert_eq!(one["failed"], 0);
    let four = json(&ocq(&["selftest", "--seed", "3", "--jobs", "4"]));
    assert_eq!(one, four);
    for p in ["2", "3", "7"] {
        assert!(ocq(&["--p", p, "selftest"]).status.success(), "p = {p}");
    }
}

#[test]
fn symbolic_identity_verdict() {
    let out = json(&ocq(&["euler", "--symbolic"]));
    assert_eq!(out["verdict"], "holds");
    assert_eq!(out["check"]["determinant_identity"], true);
}

#[test]
fn malformed_json_exits_two() {
    let out = ocq_stdin(&["qexp", "--input", "-"], "{\"context\": 3");
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "malformed");
    let out = ocq_stdin(&["qexp", "--input", "-"], "{\"context\": {\"p\": 5, \"N\": 12, \"M\": 4}, \"qexp\": {\"Q\": 0, \"coeffs\": [], \"extra\": 1}}");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tail_exhaustion_exits_three_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let w = ocq(&[
        "qexp",
        "--delta",
        "--deplete",
        "--prec-q",
        "30",
        "--as-nearly",
        "12",
    ]);
    fs::write(&path, &w.stdout).unwrap();
    let ok = ocq(&[
        "nabla-s",
        "--input",
        path.to_str().unwrap(),
        "--s",
        "2+5T",
        "--prec-q",
        "30",
    ]);
    let doc = json(&ok);
    // The default floor is ceil(N/2).
    assert!(doc["meta"]["achieved"].as_i64().unwrap() >= 6);
    let out = ocq(&[
        "nabla-s",
        "--input",
        path.to_str().unwrap(),
        "--s",
        "2+5T",
        "--prec-q",
        "30",
        "--tail",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "precision");
    assert_eq!(err["stage"], "nabla-s");
}

#[test]
fn undepleted_input_exits_four() {
    let out = ocq(&["qexp", "--delta", "--partial-s", "1", "--prec-q", "20"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["kind"], "assumption");
}

#[test]
fn mixed_contexts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    fs::write(&path, &ocq(&["qexp", "--delta", "--prec-q", "20"]).stdout).unwrap();
    let out = ocq(&["--prec-p", "10", "qexp", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["error"]
        .as_str()
        .unwrap()
        .contains("context mismatch"));
}

#[test]
fn nearly_documents_round_trip_through_nabla() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let w = ocq(&[
        "qexp",
        "--eisenstein",
        "4",
        "--deplete",
        "--prec-q",
        "30",
        "--as-nearly",
        "4+5T",
    ]);
    fs::write(&path, &w.stdout).unwrap();
    let zero_steps = json(&ocq(&[
        "nabla",
        "--input",
        path.to_str().unwrap(),
        "--times",
        "0",
        "--prec-q",
        "30",
    ]));
    assert_eq!(zero_steps, json(&w));
    let twice = ocq(&[
        "nabla",
        "--input",
        path.to_str().unwrap(),
        "--times",
        "2",
        "--prec-q",
        "30",
    ]);
    let doc = json(&twice);
    assert_eq!(doc["nearly"]["degree"], 2);
    let again = dir.path().join("w2.json");
    fs::write(&again, &twice.stdout).unwrap();
    let twisted = json(&ocq(&[
        "twist",
        "--input",
        again.to_str().unwrap(),
        "--chi",
        "0",
    ]));
    assert_eq!(twisted, doc);
}

#[test]
fn spectral_factors_integer_polynomial() {
    // (x - 1)(x - 5)(x - 25)
    let out = json(&ocq(&[
        "spectral",
        "--poly",
        "-125,155,-31,1",
        "--newton",
        "--factor",
        "1",
    ]));
    let slopes: Vec<(String, u64)> = out["newton"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            (
                s["slope"].as_str().unwrap().to_string(),
                s["length"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(slopes, [("0".into(), 1), ("1".into(), 1), ("2".into(), 1)]);
    assert_eq!(
        out["factor"]["at_most"]["coeffs"].as_array().unwrap().len(),
        3
    );
    assert_eq!(
        out["factor"]["above"]["coeffs"].as_array().unwrap().len(),
        2
    );
}

#[test]
fn spectral_projector_and_fredholm_on_matrix_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let s = |u: &str, v: i64| serde_json::json!({ "v": v, "u": u, "N": 10 });
    let zero = serde_json::json!({ "v": "inf", "u": "0", "N": 10 });
    let m = serde_json::json!({
        "p": 5, "rows": 2, "cols": 2,
        "entries": [s("2", 0), s("3", 0), zero, s("1", 1)],
        "blocks": [1, 1],
    });
    fs::write(&path, m.to_string()).unwrap();
    let out = json(&ocq(&[
        "spectral",
        "--input",
        path.to_str().unwrap(),
        "--projector",
        "0",
        "--check-fredholm",
    ]));
    assert_eq!(out["projector"]["rows"], 2);
    assert_eq!(out["fredholm"]["pass"], true);
}

#[test]
fn triple_bracket_at_two() {
    let out = json(&ocq(&[
        "--p", "2", "--prec-p", "62", "--prec-q", "120", "triple", "--f", "Delta", "--g", "E4",
        "--h", "E6", "--t", "1",
    ]));
    assert_eq!(out["stage_log"].as_array().unwrap().len(), 5);
    assert_ne!(out["value"]["v"], "inf");
    let out = ocq(&[
        "--p", "2", "--prec-p", "62", "--prec-q", "120", "triple", "--f", "E10", "--g", "E4",
        "--h", "E4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["error"]
        .as_str()
        .unwrap()
        .contains("weight mismatch"));
}

#[test]
fn fixtures_are_looked_up_by_label() {
    let dir = tempfile::tempdir().unwrap();
    let stab = json(&ocq(&["stabilize", "--form", "E8", "--prec-q", "10"]));
    fs::write(dir.path().join("f8.json"), stab["form"].to_string()).unwrap();
    let by_fixture = Command::new(env!("CARGO_BIN_EXE_ocq"))
        .args(["stabilize", "--form", "f8", "--prec-q", "10"])
        .env("OCQ_FIXTURES", dir.path())
        .output()
        .unwrap();
    assert_eq!(json(&by_fixture)["alpha"], stab["alpha"]);
    assert_eq!(ocq(&["stabilize", "--form", "f8"]).status.code(), Some(1));
    let table = dir.path().join("fixtures.json");
    fs::write(
        &table,
        serde_json::json!({ "g8": stab["form"] }).to_string(),
    )
    .unwrap();
    let by_table = ocq(&[
        "--fixtures",
        table.to_str().unwrap(),
        "stabilize",
        "--form",
        "g8",
        "--prec-q",
        "10",
    ]);
    assert_eq!(json(&by_table)["alpha"], stab["alpha"]);
}
