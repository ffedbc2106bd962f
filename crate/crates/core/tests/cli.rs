//! The `sirup` binary: verdicts, exit codes, witness files and report
//! determinism.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sirup-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn sirup(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_sirup")).args(args).output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let text = String::from_utf8(out.stdout).unwrap();
    let json = if text.trim().is_empty() || args.contains(&"--help") {
        Value::Null
    } else {
        serde_json::from_str(&text).expect("JSON report")
    };
    (code, json)
}

#[test]
fn classify_fixture_verdicts() {
    let cases = [
        ("q3.cq", "NL-complete"),
        ("q4.cq", "L-complete"),
        ("q5.cq", "FO"),
        ("q6.cq", "FO"),
        ("q7.cq", "FO"),
        ("q8.cq", "FO"),
    ];
    for (q, want) in cases {
        let (code, r) = sirup(&["classify", &fixture(q)]);
        assert_eq!(code, 0);
        assert_eq!(r["verdict"]["exact"], want, "{q}");
        assert_eq!(r["command"], "classify");
    }
    let (_, r) = sirup(&["classify", "--query", &fixture("q1.cq")]);
    assert!(r["verdict"]["exact"].is_null());
    assert_eq!(r["verdict"]["upper_bounds"], serde_json::json!(["coNP"]));
}

#[test]
fn evaluate_programs() {
    let (q, d) = (fixture("q2.cq"), fixture("d2.data"));
    for program in ["delta", "delta+", "pi"] {
        let (code, r) = sirup(&["evaluate", "--query", &q, "--data", &d, "--program", program]);
        assert_eq!(code, 0);
        assert_eq!(r["verdict"]["answer"], true, "{program}");
    }
    let (_, r) = sirup(&["evaluate", "--query", &q, "--data", &d, "--program", "sigma"]);
    assert!(r["verdict"]["answer"].as_array().unwrap().iter().any(|v| v == "b"));
}

#[test]
fn validate_empty_file() {
    let dir = scratch("empty");
    let p = dir.join("empty.cq");
    std::fs::write(&p, "").unwrap();
    let (code, r) = sirup(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["nodes"], 0);
    assert_eq!(r["verdict"]["atoms"], 0);
    assert_eq!(r["inputs"][0]["sha256"], "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

#[test]
fn input_errors_exit_one() {
    let (code, r) = sirup(&["classify", "--bogus"]);
    assert_eq!(code, 1);
    assert!(r.is_null());
    let (code, r) = sirup(&["classify", "/nonexistent/q.cq"]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "invalid");
    let dir = scratch("syntax");
    let p = dir.join("bad.cq");
    std::fs::write(&p, "R(a,b\n").unwrap();
    let (code, r) = sirup(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "syntax");
    let (code, _) = sirup(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, _) = sirup(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn caps_exit_two() {
    let (code, r) = sirup(&["cactus", &fixture("q6.cq"), "--depth", "3", "--cap", "10"]);
    assert_eq!(code, 2);
    assert_eq!(r["inconclusive"], true);
    assert_eq!(r["verdict"]["count"], 10);
    let (code, r) = sirup(&["evaluate", "--query", &fixture("q1.cq"), "--data", &fixture("d1.data"), "--max-a-nodes", "1"]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["kind"], "cap-exceeded");
    let (code, _) = sirup(&["bounded", &fixture("q6.cq"), "--max-span", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn reports_are_deterministic() {
    let runs = [
        vec!["classify".to_string(), fixture("q8.cq")],
        vec!["rewrite".into(), fixture("q5.cq"), "--depth".into(), "1".into()],
        vec!["reduce".into(), fixture("q3.cq"), "--seed".into(), "5".into(), "--check".into()],
    ];
    for args in runs {
        let args: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let strip = |mut v: Value| {
            v.as_object_mut().unwrap().remove("elapsed_ms");
            serde_json::to_string(&v).unwrap()
        };
        let (_, a) = sirup(&args);
        let (_, b) = sirup(&args);
        assert_eq!(strip(a.clone()), strip(b), "{args:?}");
        // round trip through text keeps the report unchanged
        let again: Value = serde_json::from_str(&serde_json::to_string_pretty(&a).unwrap()).unwrap();
        assert_eq!(again, a);
        for key in ["command", "inputs", "verdict", "witnesses", "caps_hit", "inconclusive", "elapsed_ms"] {
            assert!(a.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn rewrite_and_cactus_write_files() {
    let dir = scratch("files");
    let out = dir.join("rw");
    let (code, r) = sirup(&["rewrite", &fixture("q8.cq"), "--depth", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["disjunct_count"], 3);
    let files = r["witnesses"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let (code, v) = sirup(&["validate", f.as_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(v["verdict"]["shape"]["is_dag"], true);
    }
    let cout = dir.join("cactus");
    let (code, r) = sirup(&["cactus", &fixture("q6.cq"), "--depth", "2", "--check-focus", "--out", cout.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["count"], 25);
    assert_eq!(r["verdict"]["expected_count"], "25");
    assert_eq!(r["verdict"]["focus"]["focused"], false);
    assert_eq!(r["witnesses"].as_array().unwrap().len(), 25);
}

#[test]
fn bounded_emits_witnesses() {
    let dir = scratch("bounded");
    let (code, r) = sirup(&["bounded", "--query", &fixture("q4.cq"), "--emit-witness", "--out", dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["result"]["verdict"], "L-hard");
    assert_eq!(r["witnesses"].as_array().unwrap().len(), 3);
    assert!(dir.join("p_bar.data").exists());
    let (code, r) = sirup(&["bounded", &fixture("q5.cq"), "--emit-witness", "--out", dir.join("fo").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["result"]["verdict"], "FO");
    assert!(!r["witnesses"].as_array().unwrap().is_empty());
    let (code, r) = sirup(&["bounded", &fixture("q3.cq")]);
    assert_eq!(code, 1);
    assert_eq!(r["error"]["kind"], "shape");
}

#[test]
fn reduce_from_graph_file() {
    let dir = scratch("reduce");
    let g = dir.join("g.data");
    std::fs::write(&g, "E(u,v). E(v,w). s(u). t(w).").unwrap();
    let out = dir.join("inst.data");
    let (code, r) = sirup(&[
        "reduce", &fixture("q3.cq"), "--data", g.to_str().unwrap(), "--check", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["kind"], "dag");
    assert_eq!(r["verdict"]["reachable"], true);
    assert_eq!(r["verdict"]["agrees"], true);
    assert!(out.exists());
    let (code, r) = sirup(&["reduce", &fixture("q4.cq"), "--nodes", "4", "--seed", "9", "--check"]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["kind"], "undirected");
    assert_eq!(r["verdict"]["agrees"], true);
}

#[test]
fn gadget_compile_and_verify() {
    let dir = scratch("gadget");
    let f = dir.join("f.txt");
    std::fs::write(&f, "inputs: down 1\nformula: not(y1)\n").unwrap();
    let out = dir.join("g.cq");
    let (code, r) = sirup(&["gadget", f.to_str().unwrap(), "--frame", "AT", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["span"], 2);
    assert_eq!(r["verdict"]["focused_by_construction"], true);
    let (code, v) = sirup(&["validate", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"]["shape"]["is_1cq"], true);
    let (code, r) = sirup(&["gadget", "verify", "--depth", "1"]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["violations"], 0);
    let (code, _) = sirup(&["gadget", f.to_str().unwrap(), "--frame", "XX"]);
    assert_eq!(code, 1);
}

#[test]
fn schema_org_preserves_answer() {
    let (code, r) = sirup(&["schema-org", &fixture("q2.cq"), "--data", &fixture("d2.data")]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"]["agrees"], true);
    assert_eq!(r["verdict"]["round_trip"], true);
    let (code, _) = sirup(&["schema-org", &fixture("q2.cq"), "--data", &fixture("d2.data"), "--pred", "R"]);
    assert_eq!(code, 1);
}

#[test]
fn json_flag_writes_report() {
    let dir = scratch("json");
    let p = dir.join("r.json");
    let (code, r) = sirup(&["classify", &fixture("q4.cq"), "--json", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(saved, r);
}
