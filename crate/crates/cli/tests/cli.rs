use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bsmf(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bsmf"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &[u8]) -> Vec<u8> {
    let out = bsmf(args, stdin);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

const SMALL: &[&str] = &["synth", "--users-per-group", "8", "--vocab-per-corpus", "30", "--data-seed", "7"];
const FIT: &[&str] = &["fit", "--belief", "star:4", "--eta", "mult", "--eps-rbf", "1.45", "--max-iters", "150"];

#[test]
fn synth_fit_eval_pipe() {
    let ds = ok(SMALL, b"");
    let bundle = ok(FIT, &ds);
    let report = json(&ok(&["eval", "--top-k", "3"], &bundle));
    let acc = report["metrics"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(report["n_labeled"], 320);
    assert_eq!(report["config"]["step"]["kind"], "multiplicative");
    assert_eq!(report["regions"].as_array().unwrap().len(), 4);
    assert!(report["dataset_metadata"]["synth_spec"]["seed"] == 7);

    let text = String::from_utf8(ok(&["report"], &ok(&["eval"], &bundle))).unwrap();
    assert!(text.contains("accuracy"));
    assert!(text.contains("region 0 (o)"));
}

#[test]
fn default_pipeline_recovers_regions() {
    let ds = ok(&["synth", "--seed", "7"], b"");
    let bundle = ok(&["fit", "--belief", "star:4"], &ds);
    let report = json(&ok(&["eval"], &bundle));
    let acc = report["metrics"]["accuracy"].as_f64().unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
    assert_eq!(ds, ok(&["synth", "--data-seed", "7"], b""));
}

#[test]
fn fit_is_deterministic() {
    let ds = ok(SMALL, b"");
    assert_eq!(ok(FIT, &ds), ok(FIT, &ds));
}

#[test]
fn nmf_matches_identity_belief() {
    let ds = ok(SMALL, b"");
    let base = ["fit", "--eta", "mult", "--max-iters", "40", "--tol", "1e-300"];
    let nmf = json(&ok(&[&base[..], &["--mode", "nmf"]].concat(), &ds));
    let ident = json(&ok(&[&base[..], &["--belief", "identity:4"]].concat(), &ds));
    assert_eq!(nmf["loss_trace"], ident["loss_trace"]);
}

#[test]
fn disabling_both_stages_uses_raw_endorsements() {
    let ds = ok(SMALL, b"");
    let bundle = json(&ok(&["fit", "--no-m", "--no-s", "--eta", "mult", "--max-iters", "5"], &ds));
    assert_eq!(bundle["options"]["use_m"], false);
    assert_eq!(bundle["options"]["use_s"], false);
}

#[test]
fn out_dir_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let ds = ok(SMALL, b"");
    ok(&[FIT, &["--mode", "nmtf", "--out-dir", out.to_str().unwrap()]].concat(), &ds);
    for f in ["fit.json", "metrics.json", "U.csv", "M.csv", "B_tilde.csv", "assignments.csv", "loss_trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics = json(&std::fs::read(out.join("metrics.json")).unwrap());
    assert_eq!(metrics["config"]["mode"], "nmtf");
}

#[test]
fn synth_dir_round_trips_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("data");
    let direct = json(&ok(&[SMALL, &["--out-dir", d.to_str().unwrap()]].concat(), b""));
    let ingested = json(&ok(&["ingest", "--dir", d.to_str().unwrap()], b""));
    assert_eq!(direct["claims"], ingested["claims"]);
    assert_eq!(direct["incidences"], ingested["incidences"]);
    assert_eq!(direct["labels"], ingested["labels"]);
    assert_eq!(direct["metadata"]["synth_spec"], ingested["metadata"]["synth_spec"]);
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn ingest_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "claims.jsonl", "{\"claim_id\": \"c1\", \"text\": \"hello world\"}\n");
    write(dir.path(), "incidences.csv", "source_id,claim_id\nalice,c1\nbob,c9\n");
    let out = bsmf(&["ingest", "--dir", dir.path().to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "dangling_id");
    assert!(err["error"]["message"].as_str().unwrap().contains("c9"));
}

#[test]
fn malformed_input_exits_2() {
    let out = bsmf(&["fit"], b"not json");
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "json");

    let ds = ok(SMALL, b"");
    let out = bsmf(&["fit", "--eta", "mult", "--lambda2", "0.1"], &ds);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "argument");

    let out = bsmf(&["fit", "--belief", "star:1"], &ds);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "argument");
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut claims = String::new();
    let mut inc = String::from("source_id,claim_id\n");
    for j in 0..6 {
        claims.push_str(&format!("{{\"claim_id\": \"c{j}\", \"text\": \"same words here\"}}\n"));
        for i in 0..6 {
            inc.push_str(&format!("s{i},c{j}\n"));
        }
    }
    write(dir.path(), "claims.jsonl", &claims);
    write(dir.path(), "incidences.csv", &inc);
    let ds = ok(&["ingest", "--dir", dir.path().to_str().unwrap()], b"");
    let out = bsmf(&["fit", "--belief", "star:3", "--eta", "1e200", "--lambda1", "0", "--lambda2", "0"], &ds);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "divergence");
}

#[test]
fn benchmark_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &str| -> Vec<String> {
        [
            "benchmark",
            "--rounds",
            "2",
            "--users-per-group",
            "5",
            "--messages-per-user",
            "4",
            "--eta",
            "mult",
            "--max-iters",
            "20",
            "--out-dir",
            d,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |p: &Path| {
        let v = args(p.to_str().unwrap());
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        ok(&refs, b"")
    };
    let stdout = String::from_utf8(run(&a)).unwrap();
    run(&b);
    for f in ["rounds.csv", "summary.csv", "benchmark.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(stdout, std::fs::read_to_string(a.join("summary.csv")).unwrap());
    let methods: Vec<&str> = stdout.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["BSMF", "NMF", "NMTF"]);

    let text = String::from_utf8(ok(&["report", "-i", a.join("benchmark.json").to_str().unwrap()], b"")).unwrap();
    assert!(text.starts_with("2 rounds"));
}

#[test]
fn ablation_lists_variants() {
    let out = ok(
        &[
            "benchmark",
            "--ablation",
            "--rounds",
            "1",
            "--users-per-group",
            "4",
            "--messages-per-user",
            "3",
            "--eta",
            "mult",
            "--max-iters",
            "10",
        ],
        b"",
    );
    let text = String::from_utf8(out).unwrap();
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["BSMF", "BSMF-M", "BSMF-S", "BSMF-MS"]);
}
