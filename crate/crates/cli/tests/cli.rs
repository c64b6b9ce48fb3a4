use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dfgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfgen"))
        .args(args)
        .output()
        .unwrap()
}

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .display()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_source_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "bad.sol",
        "contract X {\n  function f(uint8 a) public {\n    uint8 b = ;\n  }\n}\n",
    );
    let o = dfgen(&["analyze", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.sol:3:15"), "{}", stderr(&o));
}

#[test]
fn uninitialized_use_exits_two_naming_node() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "u.sol",
        "contract X { function f(uint8 a) public { if (a > 1) { uint8 b = 1; return; } uint8 c = b; } }",
    );
    let o = dfgen(&["analyze", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("node 5"), "{}", stderr(&o));
}

#[test]
fn unknown_function_exits_three() {
    let o = dfgen(&["generate", &corpus("safe_add.sol"), "--function", "nope"]);
    assert_eq!(o.status.code(), Some(3));
    let o = dfgen(&["analyze", &corpus("safe_add.sol"), "--function", "nope"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_generations_is_a_usage_error() {
    let o = dfgen(&["generate", &corpus("safe_add.sol"), "--max-gen", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--max-gen"));
}

#[test]
fn missing_file_exits_one() {
    let o = dfgen(&["analyze", "/nonexistent/x.sol"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_reports_pairs_and_cfg() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let o = dfgen(&[
        "analyze",
        &corpus("safe_add.sol"),
        "--emit-cfg",
        dot.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["n"], 10);
    assert_eq!(v["m"], 4);
    let dups = v["dups"].as_array().unwrap();
    assert_eq!(dups.len(), 10);
    assert_eq!(
        dups.iter()
            .filter(|d| d["is_require_related"] == true)
            .count(),
        4
    );
    let g = std::fs::read_to_string(dot).unwrap();
    assert!(g.starts_with("digraph"));
}

#[test]
fn generate_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.jsonl");
    let o = dfgen(&[
        "generate",
        &corpus("safe_add.sol"),
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["covered_n"], 10);
    assert_eq!(v["approach"], "ADF-GA");
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), v["suite"].as_array().unwrap().len());
}

#[test]
fn every_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec!["analyze".into(), corpus("trade.sol")],
        vec![
            "generate".into(),
            corpus("trade.sol"),
            "--seed".into(),
            "4".into(),
        ],
        vec![
            "generate".into(),
            corpus("trade.sol"),
            "--fitness".into(),
            "random".into(),
            "--budget".into(),
            "300".into(),
        ],
    ];
    for args in runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = dfgen(&args);
        let b = dfgen(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let mut outputs = Vec::new();
    for i in 0..2 {
        let d = dir.path().join(format!("b{i}"));
        let o = dfgen(&[
            "bench",
            &corpus(""),
            "--reps",
            "2",
            "--max-gen",
            "20",
            "--require-heavy",
            "--epsilon-sweep",
            "0.3:0.5:0.1",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let files: Vec<Vec<u8>> = ["bench.csv", "runs.csv", "sweep.csv"]
            .iter()
            .map(|f| std::fs::read(d.join(f)).unwrap())
            .collect();
        outputs.push((o.stdout, files));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bench_skips_unparseable_members() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("safe_add.sol"), dir.path().join("safe_add.sol")).unwrap();
    write(dir.path(), "broken.sol", "contract {");
    let out = dir.path().join("out");
    let o = dfgen(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--reps",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("broken.sol"));
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
