//! Command-line front end: `exec`, `bench` and `build-store`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | setup failure (unreadable database, model, store or suite) |
//! | 2 | bad command-line usage |
//! | 10 to 17 | query failed; the code is the error category, see [`ErrorCategory::exit_code`] |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use blendkit::eval::{load_suite, run_suite, SuiteReport};
use blendkit::exec::{execute, explain, ExecOptions, SqliteDatabase, DEFAULT_STORE, REPORT_SCHEMA_VERSION};
use blendkit::model::{MockBackend, MockModelSpec};
use blendkit::retrieval::{load_documents, DocumentStore};
use blendkit::types::TypingPolicy;
use blendkit::ErrorCategory;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod output;
mod store;

pub use output::{write_rows, Format};
pub use store::{build_store, cache_dir, open_store, CACHE_DIR_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SETUP: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Setup {
        context: String,
        #[source]
        source: blendkit::Error,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn setup(context: impl Into<String>) -> impl FnOnce(blendkit::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Setup { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_SETUP,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blendkit", version, about = "Run SQL with embedded language-model calls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one query.
    Exec(ExecArgs),
    /// Run a JSON-lines suite and report accuracy and call counts.
    Bench(BenchArgs),
    /// Build a retrieval store from a directory of .txt files or a JSON-lines file.
    BuildStore(BuildStoreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    None,
    Hints,
    Constrained,
}

impl From<PolicyArg> for TypingPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::None => TypingPolicy::None,
            PolicyArg::Hints => TypingPolicy::Hints,
            PolicyArg::Constrained => TypingPolicy::Constrained,
        }
    }
}

/// Options shared by `exec` and `bench`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// SQLite database file, or a `.sql` script loaded into memory.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Model backend, `mock:<spec.json>`. Defaults to a mock that answers nothing.
    #[arg(long)]
    pub model: Option<String>,
    /// Retrieval store as `[name=]path`; repeatable. A directory or `.jsonl`
    /// file is built on the fly.
    #[arg(long = "store", value_name = "[NAME=]PATH")]
    pub stores: Vec<String>,
    #[arg(long)]
    pub k_search: Option<usize>,
    #[arg(long)]
    pub k_qa: Option<usize>,
    /// Record errors and replace failed functions with NULL instead of stopping.
    #[arg(long)]
    pub keep_going: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Include wall-clock times in the JSON report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    #[arg(long, conflicts_with = "query_file", required_unless_present = "query_file")]
    pub query: Option<String>,
    #[arg(long)]
    pub query_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "constrained")]
    pub policy: PolicyArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Print the execution plan and stop.
    #[arg(long)]
    pub explain: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON-lines file of `{"question", "query", "expected"}` records.
    #[arg(long)]
    pub suite: PathBuf,
    /// Policies to run; repeatable. Defaults to all three.
    #[arg(long = "policy", value_enum)]
    pub policies: Vec<PolicyArg>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct BuildStoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            }
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Exec(a) => cmd_exec(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out, err),
        Command::BuildStore(a) => cmd_build_store(&a, err),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        e.exit_code()
    })
}

fn open_db(path: Option<&Path>) -> Result<SqliteDatabase, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("--db is required".into()))?;
    let ctx = format!("database {}", path.display());
    if path.extension().is_some_and(|e| e == "sql") {
        let script = std::fs::read_to_string(path).map_err(|e| CliError::Setup {
            context: ctx.clone(),
            source: e.into(),
        })?;
        SqliteDatabase::from_script(&script).map_err(CliError::setup(ctx))
    } else if path.exists() {
        SqliteDatabase::open(path).map_err(CliError::setup(ctx))
    } else {
        Err(CliError::Usage(format!("{ctx} does not exist")))
    }
}

fn open_model(spec: Option<&str>) -> Result<MockBackend, CliError> {
    let Some(spec) = spec else {
        return MockBackend::new(MockModelSpec::default()).map_err(CliError::setup("model"));
    };
    let path = spec
        .strip_prefix("mock:")
        .ok_or_else(|| CliError::Usage(format!("unsupported model {spec:?}; expected mock:<path>")))?;
    MockBackend::from_path(Path::new(path)).map_err(CliError::setup(format!("model {path}")))
}

fn exec_options(run: &RunArgs, policy: TypingPolicy) -> Result<ExecOptions, CliError> {
    let mut opts = ExecOptions::with_policy(policy);
    opts.keep_going = run.keep_going;
    if let Some(k) = run.k_search {
        opts.k_search = k;
    }
    if let Some(k) = run.k_qa {
        opts.k_qa = k;
    }
    let mut stores = BTreeMap::new();
    for s in &run.stores {
        let (name, path) = match s.split_once('=') {
            Some((n, p)) if !n.is_empty() => (n.to_string(), p),
            _ => (DEFAULT_STORE.to_string(), s.as_str()),
        };
        if stores.contains_key(&name) {
            return Err(CliError::Usage(format!("store {name:?} given twice")));
        }
        let store = open_store(Path::new(path), cache_dir().as_deref())?;
        stores.insert(name, Arc::new(store));
    }
    opts.stores = stores;
    Ok(opts)
}

fn write_report(path: Option<&Path>, json: &str) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, format!("{json}\n"))?;
    }
    Ok(())
}

pub fn cmd_exec(a: &ExecArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let text = match (&a.query, &a.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => std::fs::read_to_string(p)?,
        (None, None) => return Err(CliError::Usage("one of --query or --query-file is required".into())),
    };
    if a.explain {
        return match explain(&text) {
            Ok(plan) => {
                write!(out, "{plan}")?;
                Ok(EXIT_OK)
            }
            Err(e) => {
                report_syntax(&text, &e, err)?;
                Ok(e.category().exit_code())
            }
        };
    }
    let db = open_db(a.run.db.as_deref())?;
    let model = open_model(a.run.model.as_deref())?;
    let opts = exec_options(&a.run, a.policy.into())?;
    let ex = execute(&text, &db, &model, &opts);
    writeln!(err, "{}", ex.report.summary())?;
    write_report(a.run.report_out.as_deref(), &ex.report.to_json(a.run.timings))?;
    match ex.result {
        Ok(rs) => {
            write_rows(&rs, a.format, out)?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            report_syntax(&text, &e, err)?;
            writeln!(err, "error[{}]: {e}", e.category())?;
            Ok(e.category().exit_code())
        }
    }
}

/// Grammar violations as JSON lines, for syntax failures only.
fn report_syntax(text: &str, e: &blendkit::Error, err: &mut dyn Write) -> std::io::Result<()> {
    if matches!(e.category(), ErrorCategory::GenericSyntax | ErrorCategory::FStringSyntax) {
        for v in blendkit::sql::validate_grammar(text) {
            writeln!(err, "{}", v.to_json_line())?;
        }
    }
    Ok(())
}

pub fn bench_json(runs: &[SuiteReport], timings: bool) -> String {
    let v = serde_json::json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "runs": runs.iter().map(|r| r.to_json_value(timings)).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&v).expect("report serializes")
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let suite = load_suite(&a.suite).map_err(CliError::setup(format!("suite {}", a.suite.display())))?;
    let db = open_db(a.run.db.as_deref())?;
    let model = open_model(a.run.model.as_deref())?;
    let policies: Vec<TypingPolicy> = if a.policies.is_empty() {
        TypingPolicy::ALL.to_vec()
    } else {
        a.policies.iter().map(|&p| p.into()).collect()
    };
    let mut runs = Vec::new();
    for p in policies {
        // Per-item failures are recorded in the report either way.
        let opts = exec_options(&a.run, p)?;
        runs.push(run_suite(&suite, &db, &model, &opts));
    }
    writeln!(
        out,
        "{:<12} {:>5} {:>10} {:>7} {:>11} {:>14} {:>13} {:>10} {:>6}",
        "policy", "items", "denotation", "exact", "generations", "forward_passes", "prefix_passes", "cache_hits", "failed"
    )?;
    for r in &runs {
        let g = &r.aggregate;
        writeln!(
            out,
            "{:<12} {:>5} {:>10.3} {:>7} {:>11} {:>14} {:>13} {:>10} {:>6}",
            r.policy.to_string(),
            g.items,
            g.denotation_accuracy,
            g.exact_matches,
            g.lm_generations,
            g.forward_passes,
            g.prefix_forward_passes,
            g.prefix_cache_hits,
            g.failed
        )?;
    }
    if suite.is_empty() {
        writeln!(err, "suite is empty")?;
    }
    write_report(a.run.report_out.as_deref(), &bench_json(&runs, a.run.timings))?;
    Ok(EXIT_OK)
}

pub fn cmd_build_store(a: &BuildStoreArgs, err: &mut dyn Write) -> Result<i32, CliError> {
    let ctx = format!("documents {}", a.input.display());
    let docs = load_documents(&a.input).map_err(CliError::setup(ctx))?;
    let store: DocumentStore = build_store(&docs);
    store
        .save(&a.output)
        .map_err(CliError::setup(format!("store {}", a.output.display())))?;
    writeln!(err, "{} documents, {} sentences -> {}", docs.len(), store.len(), a.output.display())?;
    Ok(EXIT_OK)
}
