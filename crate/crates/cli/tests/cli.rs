use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/mini")
}

fn artgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artgen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = artgen(args);
    assert_eq!(code(&out), 0, "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&artgen(&["--help"])), 0);
    assert_eq!(code(&artgen(&["--version"])), 0);
    let help = String::from_utf8(artgen(&["run-matrix", "--help"]).stdout).unwrap();
    assert!(help.contains("--set") && help.contains("louvain_seed"));
    assert_eq!(code(&artgen(&["frobnicate"])), 1);
    assert_eq!(code(&artgen(&["retrieve", "--index", "x"])), 1);
    assert_eq!(code(&artgen(&["retrieve", "--index", "x", "--queries", "q", "--method", "bm25-magic", "--output", "o"])), 1);
}

#[test]
fn missing_and_malformed_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = artgen(&["ingest", "--input", "/definitely/missing.jsonl", "--output", s(&dir.path().join("c"))]);
    assert_eq!(code(&out), 2);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n").unwrap();
    let out = artgen(&["ingest", "--input", s(&bad), "--output", s(&dir.path().join("c"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn stepwise_pipeline() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(&["ingest", "--input", s(&f.join("corpus.jsonl")), "--output", s(&p("corpus.jsonl"))]);
    ok(&[
        "derive-benchmark",
        "--outlines",
        s(&f.join("outlines.jsonl")),
        "--corpus",
        s(&p("corpus.jsonl")),
        "--output",
        s(&p("bench")),
    ]);
    assert_eq!(
        std::fs::read(p("bench/qrels.txt")).unwrap(),
        std::fs::read(f.join("benchmark/qrels.txt")).unwrap()
    );
    ok(&["index", "--corpus", s(&p("corpus.jsonl")), "--output", s(&p("index.json"))]);
    ok(&[
        "retrieve",
        "--index",
        s(&p("index.json")),
        "--queries",
        s(&p("bench/queries.jsonl")),
        "--method",
        "bm25-topic-expansion",
        "--k",
        "20",
        "--output",
        s(&p("run.txt")),
    ]);
    let embeddings = f.join("embeddings.txt");
    ok(&[
        "train-metric",
        "--benchmark",
        s(&p("bench")),
        "--embeddings",
        s(&embeddings),
        "--query-model",
        "title",
        "--output",
        s(&p("metric.json")),
    ]);
    // a title metric cannot serve a lead method
    let wrong = artgen(&[
        "cluster",
        "--benchmark",
        s(&p("bench")),
        "--embeddings",
        s(&embeddings),
        "--method",
        "qs3m-lead",
        "--model",
        s(&p("metric.json")),
        "--gold",
        "--output",
        s(&p("x.txt")),
    ]);
    assert_eq!(code(&wrong), 1);
    ok(&[
        "cluster",
        "--benchmark",
        s(&p("bench")),
        "--embeddings",
        s(&embeddings),
        "--method",
        "qs3m-title",
        "--model",
        s(&p("metric.json")),
        "--run",
        s(&p("run.txt")),
        "--output",
        s(&p("clusters.txt")),
    ]);
    ok(&[
        "cluster",
        "--benchmark",
        s(&p("bench")),
        "--embeddings",
        s(&embeddings),
        "--method",
        "sbert-euclid",
        "--gold",
        "--output",
        s(&p("gold-clusters.txt")),
    ]);
    ok(&[
        "summarize",
        "--corpus",
        s(&p("corpus.jsonl")),
        "--run",
        s(&p("run.txt")),
        "--clusters",
        s(&p("clusters.txt")),
        "--clustering-name",
        "qs3m-title",
        "--length",
        "short",
        "--output",
        s(&p("articles.jsonl")),
    ]);
    let articles = std::fs::read_to_string(p("articles.jsonl")).unwrap();
    assert_eq!(articles.lines().count(), 28);
    let first: serde_json::Value = serde_json::from_str(articles.lines().next().unwrap()).unwrap();
    assert_eq!(first["method"]["clustering"], "qs3m-title");
    assert_eq!(first["method"]["length_preset"], "short");

    let map = ok(&["evaluate", "map", "--run", s(&p("run.txt")), "--qrels", s(&p("bench/qrels.txt"))]);
    let report: serde_json::Value = serde_json::from_slice(&map.stdout).unwrap();
    assert!(report["aggregate"].as_f64().unwrap() > 0.5);
    ok(&[
        "evaluate",
        "ari",
        "--clusters",
        s(&p("gold-clusters.txt")),
        "--gold",
        s(&p("bench/clusters.txt")),
        "--output",
        s(&p("ari.json")),
    ]);
    let ari: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("ari.json")).unwrap()).unwrap();
    assert_eq!(ari["per_query"].as_object().unwrap().len(), 28);
    let rouge = ok(&[
        "evaluate",
        "rouge",
        "--articles",
        &format!("sys={}", s(&p("articles.jsonl"))),
        "--gold",
        s(&p("bench/gold.jsonl")),
        "--format",
        "csv",
    ]);
    let csv = String::from_utf8(rouge.stdout).unwrap();
    assert!(csv.starts_with("method,baseline,R1-P"), "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("sys,true,"));
}

#[test]
fn unreachable_summarizer_is_a_provider_error() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(&["index", "--corpus", s(&f.join("corpus.jsonl")), "--output", s(&p("index.json"))]);
    ok(&[
        "retrieve",
        "--index",
        s(&p("index.json")),
        "--queries",
        s(&f.join("benchmark/queries.jsonl")),
        "--k",
        "5",
        "--output",
        s(&p("run.txt")),
    ]);
    ok(&[
        "cluster",
        "--benchmark",
        s(&f.join("benchmark")),
        "--embeddings",
        s(&f.join("embeddings.txt")),
        "--method",
        "sbert-cosine",
        "--run",
        s(&p("run.txt")),
        "--output",
        s(&p("clusters.txt")),
    ]);
    let out = artgen(&[
        "summarize",
        "--corpus",
        s(&f.join("corpus.jsonl")),
        "--run",
        s(&p("run.txt")),
        "--clusters",
        s(&p("clusters.txt")),
        "--summarizer",
        "remote",
        "--summarizer-endpoint",
        "http://127.0.0.1:9/summarize",
        "--timeout-secs",
        "2",
        "--output",
        s(&p("articles.jsonl")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!p("articles.jsonl").exists());
}

#[test]
fn run_matrix_and_manifest_rerun() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let out = ok(&[
        "run-matrix",
        "--config",
        s(&f.join("config.toml")),
        "--set",
        "retrieval=[\"bm25-title\", \"bm25-topic-aggregation\"]",
        "--set",
        "clustering=[\"sbert-cosine\", \"qs3m-mean\"]",
        "--output",
        s(&first),
        "--jobs",
        "1",
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("bm25-") || l.starts_with("manual")).count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["config"].get("output").is_none());
    assert_eq!(manifest["seeds"]["bootstrap"], 7);
    for path in manifest["outputs"].as_array().unwrap() {
        assert!(first.join(path.as_str().unwrap()).is_file(), "{path}");
    }

    ok(&["run-matrix", "--from-manifest", s(&first.join("manifest.json")), "--output", s(&second), "--jobs", "3"]);
    for path in manifest["outputs"].as_array().unwrap() {
        let path = path.as_str().unwrap();
        assert_eq!(std::fs::read(first.join(path)).unwrap(), std::fs::read(second.join(path)).unwrap(), "{path}");
    }

    // an unrelated non-empty directory is never replaced
    let occupied = dir.path().join("occupied");
    std::fs::create_dir(&occupied).unwrap();
    std::fs::write(occupied.join("keep.txt"), "mine").unwrap();
    let out = artgen(&["run-matrix", "--config", s(&f.join("config.toml")), "--output", s(&occupied)]);
    assert_eq!(code(&out), 1);
    assert_eq!(std::fs::read_to_string(occupied.join("keep.txt")).unwrap(), "mine");
}

#[test]
fn keep_going_records_query_failures() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe");
    ok(&[
        "run-matrix",
        "--config",
        s(&f.join("config.toml")),
        "--set",
        "retrieval=[\"bm25-title\"]",
        "--set",
        "clustering=[\"sbert-euclid\"]",
        "--set",
        "manual=false",
        "--output",
        s(&probe),
    ]);
    let split: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(probe.join("split.json")).unwrap()).unwrap();
    let victim = split["test"][0].as_str().unwrap().to_string();

    // drop one embedding of a test query's gold paragraph
    let missing = format!("p:{victim}-s0-p0\t");
    let embeddings: String = std::fs::read_to_string(f.join("embeddings.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with(&missing))
        .map(|l| format!("{l}\n"))
        .collect();
    let broken = dir.path().join("embeddings.txt");
    std::fs::write(&broken, embeddings).unwrap();

    let args = |out: &Path| -> Vec<String> {
        [
            "run-matrix",
            "--config",
            s(&f.join("config.toml")),
            "--set",
            "retrieval=[\"bm25-title\"]",
            "--set",
            "clustering=[\"sbert-euclid\"]",
            "--set",
            "manual=false",
            "--set",
            &format!("embeddings={}", s(&broken)),
            "--output",
            s(out),
        ]
        .iter()
        .map(|a| a.to_string())
        .collect()
    };
    let strict = dir.path().join("strict");
    let a = args(&strict);
    let out = artgen(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&victim));
    assert!(!strict.exists());

    let lenient = dir.path().join("lenient");
    let mut a = args(&lenient);
    a.push("--keep-going".into());
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let failures: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(lenient.join("failures.json")).unwrap()).unwrap();
    let failures = failures.as_array().unwrap();
    assert!(!failures.is_empty());
    assert!(failures.iter().all(|x| x["query"] == victim.as_str()));
}
