use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blendkit::retrieval::{split_sentences, DocumentStore};
use blendkit::ErrorCategory;
use serde_json::Value;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");

fn fixture(rel: &str) -> PathBuf {
    Path::new(FIXTURES).join(rel)
}

fn blendkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blendkit"))
        .args(args)
        .env_remove("BLENDKIT_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Curry {
    dir: tempfile::TempDir,
}

impl Curry {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("db.sql"),
            "CREATE TABLE t(name TEXT, age INTEGER); INSERT INTO t VALUES ('Steph Curry', 37);",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("mock.json"),
            r#"{"behaviors": [{"trigger": "How old is Lebron James?", "completion": "The answer is 40."}]}"#,
        )
        .unwrap();
        Curry { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn exec(&self, extra: &[&str]) -> Output {
        let db = self.path("db.sql");
        let model = format!("mock:{}", self.path("mock.json"));
        let query = fixture("corpus/listings/working_example.sql");
        let mut args = vec!["exec", "--db", &db, "--model", &model, "--query-file", query.to_str().unwrap()];
        args.extend_from_slice(extra);
        blendkit(&args)
    }
}

#[test]
fn working_query_constrained_returns_one_row() {
    let c = Curry::new();
    let report = c.path("report.json");
    let o = c.exec(&["--policy", "constrained", "--format", "json", "--report-out", &report]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows["rows"], serde_json::json!([[1]]));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["lm_generations"], 1);
    assert_eq!(r["schema_version"], 1);
    assert!(r.get("wall_time_ms").is_none());
    assert!(stderr(&o).contains("generations=1"));
}

#[test]
fn working_query_without_types_is_classified() {
    let c = Curry::new();
    let o = c.exec(&["--policy", "none"]);
    assert_eq!(code(&o), ErrorCategory::Misc.exit_code());
    assert!(stderr(&o).contains("error[Misc]"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let c = Curry::new();
    let (a, b) = (c.path("a.json"), c.path("b.json"));
    c.exec(&["--report-out", &a]);
    c.exec(&["--report-out", &b]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn table_and_csv_output() {
    let db = fixture("sports.sql");
    let q = "SELECT name, city FROM teams WHERE name IN ('Expos', 'Mets') ORDER BY name";
    let t = blendkit(&["exec", "--db", db.to_str().unwrap(), "--query", q]);
    assert_eq!(code(&t), 0, "{}", stderr(&t));
    let table = stdout(&t);
    assert!(table.starts_with("name  | city"), "{table}");
    assert!(table.contains("Expos | NULL"));
    assert!(table.ends_with("(2 rows)\n"));
    let c = blendkit(&["exec", "--db", db.to_str().unwrap(), "--query", q, "--format", "csv"]);
    assert_eq!(stdout(&c), "name,city\nExpos,\nMets,New York\n");
}

#[test]
fn explain_needs_no_database() {
    let q = "SELECT * FROM w WHERE {{LLMMap('Is it big?', w.city)}} = TRUE AND n > 2";
    let o = blendkit(&["exec", "--explain", "--query", q]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan = stdout(&o);
    assert!(plan.contains("cost=0"), "{plan}");
    assert!(plan.contains("cost=inf"), "{plan}");
}

#[test]
fn syntax_errors_print_violations() {
    let o = blendkit(&["exec", "--explain", "--query", "SELECT {{LLMQA('q'}} FROM t"]);
    assert_eq!(code(&o), ErrorCategory::GenericSyntax.exit_code());
    let first = stderr(&o).lines().next().unwrap().to_string();
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["line"], 1);
    assert!(v["column"].as_u64().unwrap() > 0);
}

#[test]
fn usage_and_setup_failures() {
    assert_eq!(code(&blendkit(&["exec", "--db", "x.sqlite"])), 2);
    assert_eq!(code(&blendkit(&["exec", "--query", "SELECT 1"])), 2);
    assert_eq!(code(&blendkit(&["exec", "--db", "/nonexistent/db.sqlite", "--query", "SELECT 1"])), 2);
    let db = fixture("sports.sql");
    let o = blendkit(&["exec", "--db", db.to_str().unwrap(), "--query", "SELECT 1", "--model", "gpt:x"]);
    assert_eq!(code(&o), 2);
    let o = blendkit(&["exec", "--db", db.to_str().unwrap(), "--query", "SELECT 1", "--model", "mock:/nonexistent.json"]);
    assert_eq!(code(&o), 1);
}

fn bench(suite: &Path, db: &Path, model: Option<&Path>, out: &Path) -> (Output, Value) {
    let model = model.map(|m| format!("mock:{}", m.display()));
    let mut args = vec![
        "bench".to_string(),
        "--suite".into(),
        suite.display().to_string(),
        "--db".into(),
        db.display().to_string(),
        "--report-out".into(),
        out.display().to_string(),
    ];
    if let Some(m) = model {
        args.extend(["--model".to_string(), m]);
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = blendkit(&args);
    let report = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    (o, report)
}

#[test]
fn bench_orders_policies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let (o, r) = bench(
        &fixture("hybridqa/suite.jsonl"),
        &fixture("hybridqa/db.sql"),
        Some(&fixture("hybridqa/mock.json")),
        &out,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let acc: Vec<f64> = r["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|run| run["aggregate"]["denotation_accuracy"].as_f64().unwrap())
        .collect();
    assert_eq!(acc.len(), 3);
    assert!(acc[2] >= acc[1] && acc[1] >= acc[0], "{acc:?}");
    assert!(acc[2] > acc[0]);
    let table = stdout(&o);
    assert!(table.lines().nth(3).unwrap().starts_with("constrained"), "{table}");

    let again = dir.path().join("again.json");
    bench(
        &fixture("hybridqa/suite.jsonl"),
        &fixture("hybridqa/db.sql"),
        Some(&fixture("hybridqa/mock.json")),
        &again,
    );
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn bench_counts_distinct_map_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let values = ["ann", "bob", "ann", "cy", "bob", "ann", "dee"];
    let rows: Vec<String> = values.iter().map(|v| format!("('{v}')")).collect();
    let db = dir.path().join("db.sql");
    std::fs::write(&db, format!("CREATE TABLE p(name TEXT); INSERT INTO p VALUES {};", rows.join(", "))).unwrap();
    let suite = dir.path().join("suite.jsonl");
    std::fs::write(
        &suite,
        r#"{"question": "tall", "query": "SELECT name FROM p WHERE {{LLMMap('Is this person tall?', p.name)}} = TRUE", "expected": null}
{"question": "age", "query": "SELECT SUM({{LLMMap('How old is this person?', p.name)}}) FROM p", "expected": null}
"#,
    )
    .unwrap();
    let (o, r) = bench(&suite, &db, None, &dir.path().join("out.json"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // Hand count: ann, bob, cy, dee.
    let distinct = 4;
    for run in r["runs"].as_array().unwrap() {
        for item in run["items"].as_array().unwrap() {
            assert_eq!(item["lm_generations"], distinct, "{item}");
        }
        assert_eq!(run["aggregate"]["lm_generations"], 2 * distinct);
    }
}

#[test]
fn empty_suite_is_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("empty.jsonl");
    std::fs::write(&suite, "").unwrap();
    let (o, r) = bench(&suite, &fixture("sports.sql"), None, &dir.path().join("out.json"));
    assert_eq!(code(&o), 0);
    for run in r["runs"].as_array().unwrap() {
        assert_eq!(run["items"], serde_json::json!([]));
        assert_eq!(run["aggregate"]["items"], 0);
    }
}

fn build_store(input: &Path, output: &Path) -> Output {
    blendkit(&["build-store", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap()])
}

#[test]
fn build_store_counts_sentences_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    std::fs::create_dir(&docs).unwrap();
    let texts = [
        "Walter Payton played running back. He spent his career in Chicago.",
        "The river floods every spring! Farmers plan around it? They do.",
        "A single sentence without a final stop",
    ];
    for (i, t) in texts.iter().enumerate() {
        std::fs::write(docs.join(format!("d{i}.txt")), t).unwrap();
    }
    let (a, b) = (dir.path().join("a.bks"), dir.path().join("b.bks"));
    assert_eq!(code(&build_store(&docs, &a)), 0);
    assert_eq!(code(&build_store(&docs, &b)), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let store = DocumentStore::load(&a).unwrap();
    let by_hand = 2 + 3 + 1;
    assert_eq!(store.len(), by_hand);
    let splitter: usize = texts.iter().map(|t| split_sentences(t).len()).sum();
    assert_eq!(store.len(), splitter);
}

#[test]
fn build_store_from_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = dir.path().join("s.bks");
    let o = build_store(&empty, &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let store = DocumentStore::load(&out).unwrap();
    assert!(store.is_empty());
    assert!(store.search("anything", 3).is_empty());
}

#[test]
fn store_directories_are_cached() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    std::fs::create_dir(&docs).unwrap();
    std::fs::write(docs.join("a.txt"), "Walter Jerry Payton was an American football player.").unwrap();
    std::fs::write(docs.join("b.txt"), "Gary Payton played basketball.").unwrap();
    let cache = dir.path().join("cache");
    let db = fixture("sports.sql");
    let q = "SELECT {{LLMQA('What is the middle name of Walter Payton?')}}";
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_blendkit"))
            .args(["exec", "--db", db.to_str().unwrap(), "--query", q, "--format", "json"])
            .args(["--store", &format!("default={}", docs.display()), "--k-qa", "1"])
            .env("BLENDKIT_CACHE_DIR", &cache)
            .output()
            .unwrap()
    };
    let first = run();
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let cached: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let second = run();
    assert_eq!(stdout(&first), stdout(&second));
}
