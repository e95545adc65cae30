//! Exit gate: runs every acceptance criterion and prints one line each.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use blendkit::eval::{load_suite, run_suite};
use blendkit::exec::{execute, Database, ExecOptions, SqliteDatabase};
use blendkit::functions::{llmqa, FunctionConfig, QaRequest};
use blendkit::model::mock::{Behavior, TokenizerSpec};
use blendkit::model::{MockBackend, MockModelSpec, ModelBackend};
use blendkit::retrieval::{Bm25Index, DocumentStore};
use blendkit::sql::{parse, render_query};
use blendkit::types::{infer_return_type, InferredType, TypeConfig, TypingPolicy};
use blendkit::{ErrorCategory, SqlValue};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");

fn fixture(rel: &str) -> PathBuf {
    Path::new(FIXTURES).join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= budget, || format!("took {took:?}, budget {budget:?}"))
}

fn db(script: &str) -> SqliteDatabase {
    SqliteDatabase::from_script(script).expect("fixture script runs")
}

fn scripted(pairs: &[(&str, &str)]) -> MockBackend {
    MockBackend::new(MockModelSpec::scripted(pairs.iter().copied())).expect("mock builds")
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

// 1 -------------------------------------------------------------------------

fn type_inference_rules() -> Result<String, String> {
    let start = Instant::now();
    let d = db("CREATE TABLE w(city TEXT, team TEXT, n INTEGER);
                INSERT INTO w VALUES ('Washington DC', 'Red Sox', 1), ('San Jose', 'Mets', 2), ('Washington DC', 'Mets', 3);");
    let cases = [
        ("SELECT * FROM w WHERE {{LLMQA('q')}} = TRUE", "bool"),
        ("SELECT * FROM w WHERE {{LLMQA('q')}} > 40", "int"),
        ("SELECT * FROM w WHERE {{LLMQA('q')}} BETWEEN 60.1 AND 80.3", "float"),
        ("SELECT * FROM w WHERE city = {{LLMQA('q')}}", "Literal['Washington DC', 'San Jose']"),
        ("SELECT * FROM w WHERE team IN {{LLMQA('q')}}", "List[Literal['Red Sox', 'Mets']]"),
        ("SELECT * FROM w ORDER BY {{LLMQA('q')}}", "Union[float, int]"),
        ("SELECT SUM({{LLMQA('q')}}) FROM w", "Union[float, int]"),
        ("SELECT * FROM VALUES {{LLMQA('q')}}", "List[Any]"),
    ];
    for (q, want) in cases {
        let ast = parse(q).map_err(|e| format!("{q}: {e}"))?;
        let mut fetch = |c: &blendkit::sql::ColumnRef| {
            d.distinct_values("w", &c.column.value)
        };
        let inf = infer_return_type(&ast, 0, &mut fetch, None, &TypeConfig::default()).map_err(|e| format!("{q}: {e}"))?;
        ensure(inf.signature() == want, || format!("{q}: got {}, want {want}", inf.signature()))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("{} contexts", cases.len()))
}

// 2 -------------------------------------------------------------------------

fn working_pipeline() -> Result<String, String> {
    let start = Instant::now();
    let d = db("CREATE TABLE t(name TEXT, age INTEGER); INSERT INTO t VALUES ('Steph Curry', 37);");
    let m = scripted(&[("How old is Lebron James?", "The answer is 40.")]);
    let q = read("corpus/listings/working_example.sql");
    let none = execute(&q, &d, &m, &ExecOptions::with_policy(TypingPolicy::None));
    let wrong = match &none.result {
        Err(_) => none.report.first_error_category().is_some(),
        Ok(rs) => rs.rows != vec![vec![SqlValue::Integer((40 > 37) as i64)]],
    };
    ensure(wrong, || format!("policy none unexpectedly answered correctly: {:?}", none.result))?;
    let c = execute(&q, &d, &m, &ExecOptions::with_policy(TypingPolicy::Constrained));
    let sql = c.report.final_sql.clone().unwrap_or_default();
    let want_sql = read("corpus/listings/working_constrained.sql");
    ensure(squash(&sql) == squash(&want_sql), || format!("final SQL {sql:?}"))?;
    let rs = c.result.map_err(|e| e.to_string())?;
    let expected = SqlValue::Integer((40 > 37) as i64);
    ensure(rs.rows == vec![vec![expected.clone()]], || format!("rows {:?}", rs.rows))?;
    ensure(c.report.lm_generations == 1, || format!("{} generations", c.report.lm_generations))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!(
        "none -> {}, constrained -> {sql} = {expected}",
        none.report.first_error_category().map_or("wrong row".to_string(), |c| c.to_string())
    ))
}

// 3 -------------------------------------------------------------------------

const FUZZ_CONTEXTS: &[&str] = &[
    "SELECT * FROM w WHERE {{F}} = TRUE",
    "SELECT * FROM w WHERE {{F}} > 40",
    "SELECT * FROM w WHERE {{F}} BETWEEN 60.1 AND 80.3",
    "SELECT * FROM w WHERE {{F}} BETWEEN 1 AND 3",
    "SELECT * FROM w WHERE city = {{F}}",
    "SELECT * FROM w WHERE team IN {{F}}",
    "SELECT * FROM w ORDER BY {{F}}",
    "SELECT SUM({{F}}) FROM w",
    "SELECT * FROM VALUES {{F}}",
    "SELECT * FROM w WHERE {{F}}",
    "SELECT * FROM w WHERE NOT {{F}} OR n < 2",
    "SELECT * FROM w LIMIT {{F}}",
    "SELECT {{F}} > n FROM w",
    "SELECT {{F}} <= x FROM w",
    "SELECT {{F}} FROM w",
    "SELECT * FROM w WHERE team IN {{LLMQA('q', options=w.city, quantifier='{2}')}}",
    "SELECT * FROM w WHERE city IN {{LLMQA('q', quantifier='+')}}",
    "SELECT * FROM w WHERE {{LLMMap('q', w.city)}} = TRUE",
    "SELECT * FROM w ORDER BY {{LLMMap('q', w.team)}} DESC",
    "SELECT SUM({{LLMMap('q', w.n)}}) FROM w",
    "SELECT city, {{LLMMap('q', w.team)}} FROM w",
    "SELECT * FROM w WHERE {{LLMMap('q', w.x)}} > 4.5",
];

fn fuzz_completion(rng: &mut ChaCha8Rng) -> String {
    let values = ["Washington DC", "San Jose", "Red Sox", "Mets", "Boston"];
    let words = ["yes", "No.", "True", "false", "maybe", "The answer is", "about", "none", "N/A", ","];
    match rng.gen_range(0..8) {
        0 => rng.gen_range(-500i64..500).to_string(),
        1 => format!("The answer is {}.", rng.gen_range(0..100)),
        2 => format!("{:.3}", rng.gen_range(-50.0..150.0)),
        3 => {
            let v = values.choose(rng).unwrap();
            match rng.gen_range(0..3) {
                0 => v.to_string(),
                1 => v.to_uppercase(),
                _ => format!("{v} (probably)"),
            }
        }
        4 => (0..rng.gen_range(1..4)).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(" "),
        5 => (0..rng.gen_range(0..30)).map(|_| rng.gen_range(0x20u8..0x7f) as char).collect(),
        6 => format!("{}, {}", values.choose(rng).unwrap(), values.choose(rng).unwrap()),
        _ => "9".repeat(rng.gen_range(1..40)),
    }
}

fn fuzz_spec(rng: &mut ChaCha8Rng) -> MockModelSpec {
    let behaviors = (0..rng.gen_range(0..3))
        .map(|_| Behavior {
            trigger: ["Question", "f(", "Answer", "datatype", "zzz"].choose(rng).unwrap().to_string(),
            completion: fuzz_completion(rng),
            weight: rng.gen_range(0.1..3.0),
        })
        .collect();
    let tokenizer = if rng.gen_bool(0.3) {
        TokenizerSpec::Vocab {
            vocab: ["Wash", "ington", "San", " Jose", "Red", "Sox", "ue", "al", "40", "99", ". ", "ts"]
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|s| s.to_string())
                .collect(),
        }
    } else {
        TokenizerSpec::default()
    };
    MockModelSpec {
        tokenizer,
        behaviors,
        default_completion: fuzz_completion(rng),
        extra_chars: String::new(),
        eos_bias: rng.gen_range(-3.0..3.0),
    }
}

fn well_typed_fuzz() -> Result<String, String> {
    let start = Instant::now();
    let d = db("CREATE TABLE w(city TEXT, team TEXT, n INTEGER, x REAL);
                INSERT INTO w VALUES ('Washington DC', 'Red Sox', 1, 2.5), ('San Jose', 'Mets', 2, 7.25),
                                     ('Boston', 'Red Sox', 3, NULL), (NULL, 'Mets', 4, 0.5);");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let opts = ExecOptions::with_policy(TypingPolicy::Constrained);
    let runs = 1000;
    for i in 0..runs {
        let ctx = FUZZ_CONTEXTS[i % FUZZ_CONTEXTS.len()];
        let q = ctx.replace("{{F}}", "{{LLMQA('What is the value?')}}");
        let spec = fuzz_spec(&mut rng);
        let m = MockBackend::new(spec.clone()).map_err(|e| e.to_string())?;
        let ex = execute(&q, &d, &m, &opts);
        if let Err(e) = ex.result {
            return Err(format!("run {i}: {q} with {spec:?}: {e} (final SQL {:?})", ex.report.final_sql));
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{runs} runs over {} contexts, all executed", FUZZ_CONTEXTS.len()))
}

// 4 -------------------------------------------------------------------------

fn literal_alignment() -> Result<String, String> {
    let d = db("CREATE TABLE w(city TEXT); INSERT INTO w VALUES ('Washington DC'), ('San Jose'), ('San Jose');");
    let m = scripted(&[("What is the U.S. capital?", "Washington D.C.")]);
    let ex = execute(
        "SELECT city FROM w WHERE city = {{LLMQA('What is the U.S. capital?')}}",
        &d,
        &m,
        &ExecOptions::default(),
    );
    let rs = ex.result.map_err(|e| e.to_string())?;
    let distinct = d.distinct_values("w", "city").map_err(|e| e.to_string())?;
    ensure(rs.rows.len() == 1 && distinct.contains(&rs.rows[0][0]), || format!("rows {:?}", rs.rows))?;

    // Brute force over the whole constrained language.
    let language = ["washington dc", "san jose"];
    let ty = InferredType::Literal(language.iter().map(|s| s.to_string()).collect());
    let out = llmqa(
        &m,
        &QaRequest {
            question: "What is the U.S. capital?",
            context: &[],
            ty: &ty,
            searcher: None,
        },
        &FunctionConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let vocab = m.vocabulary();
    let prompt = vocab.encode(&out.prompt).map_err(|e| e.to_string())?;
    let total = |s: &str| -> f64 {
        let ids = vocab.encode(s).unwrap();
        let mut sum = 0.0;
        for i in 0..ids.len() {
            sum += m.score(&prompt, &ids[..i])[ids[i] as usize];
        }
        sum + m.score(&prompt, &ids)[vocab.eos() as usize]
    };
    let scores: Vec<(f64, &str)> = language.iter().map(|s| (total(s), *s)).collect();
    let best = scores.iter().cloned().fold((f64::NEG_INFINITY, ""), |a, b| if b.0 > a.0 { b } else { a });
    ensure(out.raw == best.1, || format!("decoder chose {:?}, brute force {:?}", out.raw, scores))?;
    Ok(format!("decoded {:?}, scores {:?}", out.raw, scores))
}

// 5 -------------------------------------------------------------------------

/// Prefix of the map prompt as characters, from the template text itself.
fn map_prefix_chars(question: &str, return_type: &str, table: &str, column: &str) -> usize {
    let template = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/templates/llmmap.txt")).unwrap();
    let head = &template[..template.find("{% cache %}").unwrap()];
    head.replace("{{question}}", question)
        .replace("{{return_type}}", return_type)
        .replace("{{table_name}}", table)
        .replace("{{column_name}}", column)
        .chars()
        .count()
}

fn map_dedup_and_prefix_cache() -> Result<String, String> {
    let m = scripted(&[]);
    let q = "SELECT v FROM r WHERE {{LLMMap('Is it good?', r.v)}} = TRUE";
    let prefix = map_prefix_chars("Is it good?", "bool", "r", "v") as u64;
    let d = db("CREATE TABLE r(v TEXT); INSERT INTO r VALUES ('a'), ('b'), ('a'), ('b');");
    let ex = execute(q, &d, &m, &ExecOptions::default());
    ex.result.map_err(|e| e.to_string())?;
    ensure(ex.report.lm_generations == 2, || format!("{} generations on 2 distinct", ex.report.lm_generations))?;
    let mut seen = Vec::new();
    for n in [2usize, 5, 20] {
        let values: Vec<String> = (0..n).map(|i| format!("('v{i}'), ('v{i}')")).collect();
        let d = db(&format!("CREATE TABLE r(v TEXT); INSERT INTO r VALUES {};", values.join(", ")));
        let ex = execute(q, &d, &m, &ExecOptions::default());
        ex.result.map_err(|e| e.to_string())?;
        let r = &ex.report;
        ensure(r.lm_generations == n as u64, || format!("N={n}: {} generations", r.lm_generations))?;
        ensure(r.prefix_forward_passes == prefix, || {
            format!("N={n}: {} prefix passes, prefix is {prefix}", r.prefix_forward_passes)
        })?;
        ensure(r.prefix_cache_hits == n as u64 - 1, || format!("N={n}: {} cache hits", r.prefix_cache_hits))?;
        seen.push(r.prefix_forward_passes);
    }
    Ok(format!("2 generations on 4 rows; prefix passes {seen:?} for N=[2, 5, 20], prefix {prefix} tokens"))
}

// 6 -------------------------------------------------------------------------

fn eager_filtering() -> Result<String, String> {
    let mut script = String::from(
        "CREATE TABLE teams(id INTEGER, league TEXT);
         INSERT INTO teams VALUES (1, 'NBA'), (2, 'MLB'), (3, 'NHL'), (4, 'MLS');
         CREATE TABLE players(name TEXT, team_id INTEGER);",
    );
    for i in 0..20 {
        script.push_str(&format!("INSERT INTO players VALUES ('player {i}', {});", i % 5 + 1));
    }
    let d = db(&script);
    let q = "SELECT p.name FROM players p JOIN teams t ON p.team_id = t.id \
             WHERE t.league = 'NBA' AND {{LLMMap('Is this player tall?', p.name)}} = TRUE";
    let before = d.query("SELECT COUNT(DISTINCT name) FROM players").map_err(|e| e.to_string())?.rows[0][0].clone();
    let after = d
        .query("SELECT COUNT(DISTINCT p.name) FROM players p JOIN teams t ON p.team_id = t.id WHERE t.league = 'NBA'")
        .map_err(|e| e.to_string())?
        .rows[0][0]
        .clone();
    ensure(before == SqlValue::Integer(20) && after == SqlValue::Integer(4), || format!("fixture {before}/{after}"))?;
    let ex = execute(q, &d, &scripted(&[]), &ExecOptions::default());
    ex.result.map_err(|e| e.to_string())?;
    ensure(ex.report.lm_generations == 4, || format!("{} generations", ex.report.lm_generations))?;
    Ok(format!("{before} distinct -> {} generations", ex.report.lm_generations))
}

// 7 -------------------------------------------------------------------------

fn sorted_files(dir: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "sql"))
        .collect();
    files.sort();
    files
}

fn oracle_equivalence() -> Result<String, String> {
    let d = db(&read("sports.sql"));
    let m = scripted(&[]);
    let files = sorted_files("corpus/native");
    ensure(files.len() == 25, || format!("{} native queries", files.len()))?;
    for f in &files {
        let q = std::fs::read_to_string(f).unwrap();
        let direct = d.query(&q).map_err(|e| format!("{}: {e}", f.display()))?;
        let ex = execute(&q, &d, &m, &ExecOptions::default());
        let got = ex.result.map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(got.sorted_rows() == direct.sorted_rows(), || format!("{}: rows differ", f.display()))?;
        if q.to_uppercase().contains("ORDER BY") {
            ensure(got.rows == direct.rows, || format!("{}: order differs", f.display()))?;
        }
        ensure(ex.report.lm_generations == 0 && ex.report.native_statements == 1, || {
            format!("{}: {:?}", f.display(), ex.report.summary())
        })?;
    }
    Ok(format!("{} queries identical", files.len()))
}

// 8 -------------------------------------------------------------------------

fn policy_ordering() -> Result<String, String> {
    let d = db(&read("hybridqa/db.sql"));
    let m = MockBackend::from_path(&fixture("hybridqa/mock.json")).map_err(|e| e.to_string())?;
    let suite = load_suite(&fixture("hybridqa/suite.jsonl")).map_err(|e| e.to_string())?;
    ensure(suite.len() == 10, || format!("{} items", suite.len()))?;
    let runs: Vec<_> = TypingPolicy::ALL
        .iter()
        .map(|&p| run_suite(&suite, &d, &m, &ExecOptions::with_policy(p)))
        .collect();
    let acc: Vec<usize> = runs.iter().map(|r| r.aggregate.denotation_matches).collect();
    let (none, hints, constrained) = (acc[0], acc[1], acc[2]);
    ensure(constrained >= hints && hints >= none, || format!("accuracy none={none} hints={hints} constrained={constrained}"))?;
    let strictly = runs[2]
        .items
        .iter()
        .zip(&runs[1].items)
        .filter(|(c, h)| c.denotation_match && !h.denotation_match)
        .count();
    ensure(strictly >= 3, || format!("constrained beats hints on only {strictly} items"))?;
    Ok(format!("none={none}/10 hints={hints}/10 constrained={constrained}/10, constrained wins {strictly} items over hints"))
}

// 9 -------------------------------------------------------------------------

fn error_taxonomy() -> Result<String, String> {
    let d = db("CREATE TABLE w(name TEXT, city TEXT, age INTEGER);
                INSERT INTO w VALUES ('Steph Curry', 'San Francisco', 37), ('Yuki', '東京', 30);");
    let m = scripted(&[("How old is Lebron James?", "The answer is 40.")]);
    let cases = [
        ("SELECT {{LLMQA('In which city is {} located?', (SELECT name FROM w WHERE 0))}}", TypingPolicy::Constrained, ErrorCategory::EmptyLLMQAContext),
        ("SELECT * FROM w WHERE {{LLMQA('q'}}", TypingPolicy::Constrained, ErrorCategory::GenericSyntax),
        ("SELECT nonexistent FROM w", TypingPolicy::Constrained, ErrorCategory::ColumnReferenceError),
        ("SELECT * FROM w WHERE {{LLMMap('Is it big?', w.population)}}", TypingPolicy::Constrained, ErrorCategory::HallucinatedColumn),
        ("SELECT * FROM w WHERE {{LLMMap('Is it a capital?', w.city)}}", TypingPolicy::Constrained, ErrorCategory::TokenizationError),
        ("SELECT * FROM w WHERE {{LLMMap('Is it big?', cities.name)}}", TypingPolicy::Constrained, ErrorCategory::HallucinatedTable),
        ("SELECT {{LLMQA('Who is {0}?', (SELECT name FROM w))}}", TypingPolicy::Constrained, ErrorCategory::FStringSyntax),
        ("SELECT {{LLMQA('How old is Lebron James?')}} > age FROM w", TypingPolicy::None, ErrorCategory::Misc),
    ];
    let mut seen = BTreeSet::new();
    for (q, policy, want) in cases {
        let ex = execute(q, &d, &m, &ExecOptions::with_policy(policy));
        let got = ex.report.first_error_category();
        ensure(ex.result.is_err() && got == Some(want), || format!("{q}: got {got:?}, want {want}"))?;
        seen.insert(want.to_string());
    }
    let all: BTreeSet<String> = ErrorCategory::ALL.iter().map(|c| c.to_string()).collect();
    ensure(seen == all, || format!("covered {seen:?}"))?;
    Ok(format!("{} queries, {} categories", cases.len(), seen.len()))
}

// 10 ------------------------------------------------------------------------

/// Textbook BM25, written out independently of the library.
fn bm25_oracle(docs: &[&str], query: &str, k1: f64, b: f64) -> Vec<f64> {
    let toks: Vec<Vec<String>> = docs
        .iter()
        .map(|d| d.split_whitespace().map(|t| t.to_lowercase()).collect())
        .collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms: Vec<String> = query.split_whitespace().map(|t| t.to_lowercase()).collect();
    terms.sort();
    terms.dedup();
    toks.iter()
        .map(|doc| {
            terms
                .iter()
                .map(|t| {
                    let df = toks.iter().filter(|d| d.contains(t)).count() as f64;
                    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                    let tf = doc.iter().filter(|w| *w == t).count() as f64;
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl))
                })
                .sum()
        })
        .collect()
}

fn retrieval_correctness() -> Result<String, String> {
    let docs = ["the cat sat on the mat", "the dog sat", "cats and dogs"];
    let query = "the cat sat";
    let index = Bm25Index::build(docs.iter().copied(), 1.5, 0.75);
    let got = index.scores(query);
    let want = bm25_oracle(&docs, query, 1.5, 0.75);
    for (g, w) in got.iter().zip(&want) {
        ensure((g - w).abs() < 1e-6, || format!("bm25 {got:?} vs {want:?}"))?;
    }
    // First document, worked by hand: idf(the)=idf(sat)=ln 1.6, idf(cat)=ln(8/3), K=2.0625.
    let hand = 1.6f64.ln() * (2.0 * 2.5 / 4.0625) + (8.0f64 / 3.0).ln() * (2.5 / 3.0625) + 1.6f64.ln() * (2.5 / 3.0625);
    ensure((got[0] - hand).abs() < 1e-6, || format!("doc 0: {} vs hand {hand}", got[0]))?;

    let corpus: Vec<String> = read("payton/corpus.txt").lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
    let store = DocumentStore::from_texts(&corpus);
    let planted = "Walter Jerry Payton was an American football player.";
    let hits = store.search("What is the middle name of walter payton?", 1);
    ensure(hits.first().is_some_and(|h| h.text == planted), || format!("top hit {hits:?}"))?;
    let all = store.search("walter payton", 100);
    ensure(all.len() == store.len(), || format!("k=100 returned {} of {}", all.len(), store.len()))?;
    ensure(store.search("walter payton", 0).is_empty(), || "k=0 returned hits".into())?;
    Ok(format!("bm25 within 1e-6, top-1 planted, k clamped to {}", store.len()))
}

// 11 ------------------------------------------------------------------------

fn round_trip_parsing() -> Result<String, String> {
    let mut n = 0;
    let listings = sorted_files("corpus/listings");
    ensure(listings.len() >= 11, || format!("{} listings", listings.len()))?;
    for dir in ["corpus/listings", "corpus/native", "corpus/blend"] {
        for f in sorted_files(dir) {
            let text = std::fs::read_to_string(&f).unwrap();
            let ast = parse(&text).map_err(|e| format!("{}: {e}", f.display()))?;
            let once = render_query(&ast);
            let again = parse(&once).map_err(|e| format!("{}: re-parse: {e}", f.display()))?;
            ensure(again == ast, || format!("{}: AST changed after render", f.display()))?;
            ensure(render_query(&again) == once, || format!("{}: render not a fixpoint", f.display()))?;
            n += 1;
        }
    }
    Ok(format!("{n} queries at fixpoint"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 11] = [
        ("type inference rules", type_inference_rules),
        ("working pipeline under all policies", working_pipeline),
        ("well-typedness fuzz", well_typed_fuzz),
        ("literal alignment", literal_alignment),
        ("map dedup and prefix caching", map_dedup_and_prefix_cache),
        ("eager filtering", eager_filtering),
        ("oracle equivalence", oracle_equivalence),
        ("policy ordering", policy_ordering),
        ("error taxonomy", error_taxonomy),
        ("retrieval correctness", retrieval_correctness),
        ("round-trip parsing", round_trip_parsing),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:?}]", i + 1, start.elapsed()),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
