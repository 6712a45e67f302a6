//! End-to-end tests of the command-line pipeline: artifact layout,
//! determinism, exit codes, machine-readable errors, manifest tamper
//! detection, config-file precedence, and DOT well-formedness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccr"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn ccr");
    assert!(
        out.status.success(),
        "ccr {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> (i32, serde_json::Value) {
    let out = bin().args(args).output().expect("spawn ccr");
    assert!(!out.status.success(), "ccr {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or("");
    let json: serde_json::Value = serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not error JSON ({e}): {stderr}"));
    (out.status.code().expect("exit code"), json)
}

/// Drive generate → truth → run → evaluate → viz in `root`, returning the
/// run directory.
fn full_pipeline(root: &Path, reasoner: &str, samples: &str, subsamples: &str) -> PathBuf {
    let root_s = root.to_str().unwrap();
    run_ok(&[
        "generate",
        "--fixture",
        "taxonomy-eight",
        "--seed",
        "3",
        "--samples",
        samples,
        "--out",
        root_s,
    ]);
    let dir = root.join("taxonomy-eight-s3");
    let dir_s = dir.to_str().unwrap();
    run_ok(&["truth", "--dir", dir_s]);
    run_ok(&["run", "--dir", dir_s, "--reasoner", reasoner, "--concurrency", "4"]);
    run_ok(&["evaluate", "--dir", dir_s, "--subsamples", subsamples]);
    run_ok(&["viz", "--dir", dir_s]);
    dir
}

#[test]
fn pipeline_produces_the_full_artifact_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = full_pipeline(tmp.path(), "oracle", "150", "80");
    for name in [
        "task.json",
        "corpus.jsonl",
        "truth.json",
        "responses.jsonl",
        "report.json",
        "estimates.csv",
        "manifest.json",
        "cct.dot",
        "plots/scatter.csv",
        "plots/validity.csv",
        "plots/mediation.csv",
        "plots/schema.json",
    ] {
        assert!(dir.join(name).exists(), "missing artifact {name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["task_id"], "taxonomy-eight-s3");
    assert_eq!(report["label"], "VC");
    assert_eq!(report["consistent"], true);
}

#[test]
fn pipeline_is_byte_deterministic_across_runs() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    let dir_a = full_pipeline(tmp_a.path(), "oracle", "30", "40");
    let dir_b = full_pipeline(tmp_b.path(), "oracle", "30", "40");
    for name in ["task.json", "corpus.jsonl", "responses.jsonl", "truth.json", "report.json", "cct.dot"]
    {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between identical runs");
    }
}

#[test]
fn validation_errors_exit_2_with_error_json() {
    let (code, json) = run_err(&["generate", "--fixture", "no-such-fixture"]);
    assert_eq!(code, 2);
    assert_eq!(json["error"]["kind"], "validation");
    assert_eq!(json["error"]["code"], 2);
    assert!(json["error"]["message"].as_str().unwrap().contains("no-such-fixture"));

    // Flag conflicts are validation failures too (clap's own exit code).
    let out = bin()
        .args(["generate", "--fixture", "candyparty-eight", "--bccs", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    std::fs::create_dir(&dir).unwrap();
    let (code, _) = run_err(&[
        "generate",
        "--fixture",
        "candyparty-eight",
        "--samples",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn missing_artifacts_exit_4_with_error_json() {
    let (code, json) = run_err(&["evaluate", "--dir", "/nonexistent/run"]);
    assert_eq!(code, 4);
    assert_eq!(json["error"]["kind"], "data");
    assert_eq!(json["error"]["code"], 4);

    let (code, _) = run_err(&["truth", "--task", "/nonexistent/task.json"]);
    assert_eq!(code, 4);

    let (code, _) = run_err(&["viz", "--report", "/nonexistent/report.json"]);
    assert_eq!(code, 4);
}

#[test]
fn missing_credential_for_remote_runs_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&[
        "generate",
        "--fixture",
        "candyparty-eight",
        "--seed",
        "0",
        "--samples",
        "5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let dir = tmp.path().join("candyparty-eight-s0");
    let out = bin()
        .args([
            "run",
            "--dir",
            dir.to_str().unwrap(),
            "--reasoner",
            "remote",
            "--endpoint",
            "http://localhost:1",
            "--model",
            "m",
        ])
        .env_remove("CCR_API_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap())
            .unwrap();
    assert!(json["error"]["message"].as_str().unwrap().contains("CCR_API_KEY"));
}

#[test]
fn rerunning_without_resume_fails_and_resume_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&[
        "generate",
        "--fixture",
        "candyparty-eight",
        "--seed",
        "1",
        "--samples",
        "10",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let dir = tmp.path().join("candyparty-eight-s1");
    let dir_s = dir.to_str().unwrap();
    run_ok(&["run", "--dir", dir_s, "--reasoner", "oracle"]);
    let (code, json) = run_err(&["run", "--dir", dir_s, "--reasoner", "oracle"]);
    assert_eq!(code, 4);
    assert!(json["error"]["message"].as_str().unwrap().contains("resume"));
    let out = run_ok(&["run", "--dir", dir_s, "--reasoner", "oracle", "--resume"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("600 resumed"), "unexpected stdout: {stdout}");
}

#[test]
fn tampered_artifacts_are_rejected_at_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_str().unwrap();
    run_ok(&[
        "generate", "--fixture", "candyparty-eight", "--seed", "2", "--samples", "10", "--out",
        root,
    ]);
    let dir = tmp.path().join("candyparty-eight-s2");
    let dir_s = dir.to_str().unwrap();
    run_ok(&["run", "--dir", dir_s, "--reasoner", "oracle"]);

    // Append a line to the corpus after it was recorded.
    let corpus_path = dir.join("corpus.jsonl");
    let mut corpus = std::fs::read_to_string(&corpus_path).unwrap();
    corpus.push_str("{\"tampered\": true}\n");
    std::fs::write(&corpus_path, corpus).unwrap();

    let (code, json) = run_err(&["evaluate", "--dir", dir_s, "--subsamples", "10"]);
    assert_eq!(code, 4);
    assert!(json["error"]["message"].as_str().unwrap().contains("corpus.jsonl"));
}

#[test]
fn config_file_fills_defaults_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"generate": {"fixture": "candyparty-eight", "samples": 7, "seed": 5}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("runs");

    // File supplies fixture/samples/seed; only --out comes from flags.
    run_ok(&[
        "--config",
        config.to_str().unwrap(),
        "generate",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let corpus =
        std::fs::read_to_string(out_dir.join("candyparty-eight-s5").join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 7 * 6, "7 samples x 6 planned pairs");

    // An explicit flag overrides the file's value for the same knob.
    run_ok(&[
        "--config",
        config.to_str().unwrap(),
        "generate",
        "--samples",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "6",
    ]);
    let corpus =
        std::fs::read_to_string(out_dir.join("candyparty-eight-s6").join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 3 * 6);
}

#[test]
fn consistency_only_evaluation_omits_truth_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_str().unwrap();
    run_ok(&[
        "generate", "--fixture", "taxonomy-eight", "--seed", "4", "--samples", "20", "--out",
        root,
    ]);
    let dir = tmp.path().join("taxonomy-eight-s4");
    let dir_s = dir.to_str().unwrap();
    run_ok(&["run", "--dir", dir_s, "--reasoner", "oracle"]);
    run_ok(&["evaluate", "--dir", dir_s, "--subsamples", "20", "--no-truth"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["label"], serde_json::Value::Null);
    assert!(report["consistent"].is_boolean());
    assert_eq!(report["quantities"][0]["truth"], serde_json::Value::Null);

    // Without validity information the cut-tree rendering must refuse.
    let (code, _) = run_err(&["viz", "--dir", dir_s]);
    assert_eq!(code, 4);
}

#[test]
fn linear_simulation_recovers_the_worked_effects() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("linear.csv");
    run_ok(&[
        "simulate",
        "linear-ate",
        "--edge-x5x6",
        "--sizes",
        "10000",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    let ate_x3y: f64 = fields[2].parse().unwrap();
    let ate_x3y_unadjusted: f64 = fields[3].parse().unwrap();
    let ate_x1y: f64 = fields[4].parse().unwrap();
    assert!((ate_x3y - 4.5).abs() < 0.5);
    assert!((ate_x3y_unadjusted - 4.5).abs() > 0.5, "confounding must bias the unadjusted fit");
    assert!((ate_x1y - 23.625).abs() < 0.5);
}

// ── DOT well-formedness ─────────────────────────────────────────────────────

/// A parsed DOT digraph: node attribute lists and edge attribute lists, in
/// document order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct DotGraph {
    name: String,
    nodes: Vec<(String, BTreeMap<String, String>)>,
    edges: Vec<(String, String, BTreeMap<String, String>)>,
}

/// Minimal parser for the emitted subset of the DOT grammar: one statement
/// per line; quoted identifiers; `[k=v, …]` attribute lists; `//` comments
/// and bare defaults (`rankdir=…`, `node […]`) skipped.
fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty document")?;
    let name = header
        .strip_prefix("digraph ")
        .and_then(|rest| rest.trim_end().strip_suffix('{'))
        .ok_or_else(|| format!("bad header: {header}"))?
        .trim()
        .to_string();
    let mut graph = DotGraph { name, nodes: Vec::new(), edges: Vec::new() };
    let mut closed = false;
    for raw in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if line == "}" {
            closed = true;
            continue;
        }
        if closed {
            return Err(format!("statement after closing brace: {line}"));
        }
        if line.starts_with("rankdir") || line.starts_with("node ") {
            continue;
        }
        let stmt = line.strip_suffix(';').ok_or_else(|| format!("missing semicolon: {line}"))?;
        let (head, attrs) = match stmt.find('[') {
            Some(open) => {
                let close = stmt.rfind(']').ok_or_else(|| format!("unclosed attrs: {line}"))?;
                (stmt[..open].trim(), parse_attrs(&stmt[open + 1..close])?)
            }
            None => (stmt.trim(), BTreeMap::new()),
        };
        match head.split_once("->") {
            Some((from, to)) => graph.edges.push((
                unquote(from.trim())?,
                unquote(to.trim())?,
                attrs,
            )),
            None => graph.nodes.push((unquote(head)?, attrs)),
        }
    }
    if !closed {
        return Err("missing closing brace".into());
    }
    Ok(graph)
}

fn parse_attrs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut attrs = BTreeMap::new();
    for part in text.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad attribute: {part}"))?;
        let v = v.trim();
        let v = if v.starts_with('"') { unquote(v)? } else { v.to_string() };
        attrs.insert(k.trim().to_string(), v);
    }
    Ok(attrs)
}

fn unquote(text: &str) -> Result<String, String> {
    text.strip_prefix('"')
        .and_then(|rest| rest.strip_suffix('"'))
        .map(String::from)
        .ok_or_else(|| format!("expected quoted identifier: {text}"))
}

fn render_dot(graph: &DotGraph) -> String {
    let mut out = format!("digraph {} {{\n", graph.name);
    let fmt_attrs = |attrs: &BTreeMap<String, String>| {
        if attrs.is_empty() {
            String::new()
        } else {
            let inner: Vec<String> =
                attrs.iter().map(|(k, v)| format!("{k}=\"{v}\"")).collect();
            format!(" [{}]", inner.join(", "))
        }
    };
    for (node, attrs) in &graph.nodes {
        out.push_str(&format!("  \"{node}\"{};\n", fmt_attrs(attrs)));
    }
    for (from, to, attrs) in &graph.edges {
        out.push_str(&format!("  \"{from}\" -> \"{to}\"{};\n", fmt_attrs(attrs)));
    }
    out.push_str("}\n");
    out
}

#[test]
fn emitted_dot_parses_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = full_pipeline(tmp.path(), "oracle", "40", "40");
    let text = std::fs::read_to_string(dir.join("cct.dot")).unwrap();

    let graph = parse_dot(&text).expect("emitted DOT must parse");
    assert_eq!(graph.name, "cct");

    // Node set: the cut chain X, C, D, Y, each with a fill color.
    let node_names: Vec<&str> = graph.nodes.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(node_names, ["X", "C", "D", "Y"]);
    for (node, attrs) in &graph.nodes {
        assert!(attrs.contains_key("fillcolor"), "node {node} lacks fillcolor");
    }

    // Every edge endpoint refers to a declared node, and the base quantity
    // edges (the complete DAG over 4 chain nodes) are all present.
    for (from, to, _) in &graph.edges {
        assert!(node_names.contains(&from.as_str()), "undeclared node {from}");
        assert!(node_names.contains(&to.as_str()), "undeclared node {to}");
    }
    let base_edges = graph
        .edges
        .iter()
        .filter(|(_, _, attrs)| !attrs.contains_key("penwidth"))
        .count();
    assert_eq!(base_edges, 6, "complete DAG over the 4-node chain");

    // Overlay edges carry the distinct-path styling.
    for (_, _, attrs) in graph.edges.iter().filter(|(_, _, a)| a.contains_key("penwidth")) {
        assert_eq!(attrs.get("constraint").map(String::as_str), Some("false"));
        assert!(attrs["color"].starts_with('#'), "overlay color must be a palette hex");
    }

    // Round trip: parse → render → parse reaches a fixed point.
    let rendered = render_dot(&graph);
    let reparsed = parse_dot(&rendered).expect("rendered DOT must parse");
    assert_eq!(graph, reparsed);
}
