//! The language-model functions: LLMQA (reduce to one value or list),
//! LLMMap and LLMSearchMap (one answer per distinct column value).

pub mod prompt;

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::Result;
use crate::model::decode::{decode_constrained, decode_unconstrained};
use crate::model::{CacheStats, ModelBackend, PrefixCacheSession, TokenAutomaton, TokenId};
use crate::retrieval::DocumentStore;
use crate::sql::ColumnRef;
use crate::types::{coerce_output, type_to_pattern, Coerced, InferredType, TypeConfig, TypingPolicy};
use crate::value::SqlValue;

pub use prompt::{fill_placeholders, map_prompt, qa_prompt, render_context, Prompt};

pub const DEFAULT_QA_K: usize = 10;
pub const DEFAULT_MAP_K: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionConfig {
    pub policy: TypingPolicy,
    pub types: TypeConfig,
    /// Token budget per generation.
    pub max_tokens: usize,
    /// Character budget of the QA context block.
    pub context_budget: usize,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        FunctionConfig {
            policy: TypingPolicy::Constrained,
            types: TypeConfig::default(),
            max_tokens: 256,
            context_budget: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub generations: u64,
    pub cache: CacheStats,
}

impl GenerationStats {
    pub fn add(&mut self, other: &GenerationStats) {
        self.generations += other.generations;
        self.cache.add(&other.cache);
    }
}

/// A retrieval source attached to a function call.
#[derive(Debug, Clone, Copy)]
pub struct Searcher<'a> {
    pub store: &'a DocumentStore,
    pub k: usize,
}

impl Searcher<'_> {
    fn context(&self, query: &str) -> String {
        self.store
            .search(query, self.k)
            .into_iter()
            .map(|h| h.text)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// The type the output is coerced to: the inferred type when decoding is
/// constrained, otherwise only the list/scalar shape survives.
pub fn effective_type(ty: &InferredType, policy: TypingPolicy) -> InferredType {
    match policy {
        TypingPolicy::Constrained => ty.clone(),
        TypingPolicy::None | TypingPolicy::Hints => ty.erased(),
    }
}

fn hint_for(ty: &InferredType, policy: TypingPolicy) -> Option<String> {
    (policy != TypingPolicy::None).then(|| ty.hint())
}

/// Decodes one answer under the policy, returning the raw text.
fn generate<B: ModelBackend + ?Sized>(
    backend: &B,
    session: &mut PrefixCacheSession,
    prompt: &[TokenId],
    automaton: Option<&TokenAutomaton>,
    cfg: &FunctionConfig,
) -> String {
    match automaton {
        Some(a) => decode_constrained(backend, session, prompt, a, cfg.max_tokens).text,
        None => decode_unconstrained(backend, session, prompt, cfg.max_tokens, &["\n".to_string()]).text,
    }
}

fn automaton_for<B: ModelBackend + ?Sized>(
    backend: &B,
    ty: &InferredType,
    cfg: &FunctionConfig,
) -> Result<Option<TokenAutomaton>> {
    if cfg.policy != TypingPolicy::Constrained {
        return Ok(None);
    }
    let pattern = type_to_pattern(ty, &cfg.types)?;
    TokenAutomaton::compile(&pattern.pattern, backend.vocabulary()).map(Some)
}

#[derive(Debug, Clone)]
pub struct QaRequest<'a> {
    /// Question with placeholders already filled.
    pub question: &'a str,
    /// Rows of the evaluated context arguments.
    pub context: &'a [Vec<SqlValue>],
    pub ty: &'a InferredType,
    pub searcher: Option<Searcher<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaOutput {
    pub value: Coerced,
    pub raw: String,
    pub prompt: String,
    pub stats: GenerationStats,
}

/// One generation answering `req.question`; a list answer (options with a
/// quantifier, IN, VALUES) is decoded as a single sequence.
pub fn llmqa<B: ModelBackend + ?Sized>(
    backend: &B,
    req: &QaRequest<'_>,
    cfg: &FunctionConfig,
) -> Result<QaOutput> {
    let mut parts = Vec::new();
    if !req.context.is_empty() {
        parts.push(render_context(req.context, cfg.context_budget));
    }
    if let Some(s) = &req.searcher {
        parts.push(s.context(req.question));
    }
    parts.retain(|p| !p.is_empty());
    let context = (!parts.is_empty()).then(|| parts.join("\n"));
    let hint = hint_for(req.ty, cfg.policy);
    let prompt = qa_prompt(req.question, hint.as_deref(), context.as_deref()).text();
    let ids = backend.vocabulary().encode(&prompt)?;
    let automaton = automaton_for(backend, req.ty, cfg)?;
    let mut session = PrefixCacheSession::new(Vec::new());
    let raw = generate(backend, &mut session, &ids, automaton.as_ref(), cfg);
    let value = coerce_output(&raw, &effective_type(req.ty, cfg.policy))?;
    Ok(QaOutput {
        value,
        raw,
        prompt,
        stats: GenerationStats {
            generations: 1,
            cache: session.stats(),
        },
    })
}

#[derive(Debug, Clone)]
pub struct MapRequest<'a> {
    /// Question template; a `{}` is filled with each value for retrieval.
    pub question: &'a str,
    pub column: &'a ColumnRef,
    pub values: &'a [SqlValue],
    pub ty: &'a InferredType,
    pub searcher: Option<Searcher<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    /// `(input, coerced output)` per distinct input, in first-seen order.
    pub rows: Vec<(SqlValue, SqlValue)>,
    pub raw: Vec<String>,
    /// Tokens in the shared instruction prefix.
    pub prefix_tokens: usize,
    pub stats: GenerationStats,
}

/// Distinct non-NULL values in first-seen order.
pub fn distinct_values(values: &[SqlValue]) -> Vec<SqlValue> {
    let mut seen = HashSet::new();
    values
        .iter()
        .filter(|v| !v.is_null() && seen.insert(v.key()))
        .cloned()
        .collect()
}

/// One generation per distinct non-NULL input. The instruction and
/// few-shot block form a prefix shared by every generation; after the first
/// value fills the cache, the rest fan out across threads when the backend
/// allows it. Each generation starts from the cached prefix alone, so the
/// counts do not depend on scheduling.
pub fn llmmap<B: ModelBackend + ?Sized>(
    backend: &B,
    req: &MapRequest<'_>,
    cfg: &FunctionConfig,
) -> Result<MapOutput> {
    let values = distinct_values(req.values);
    let table = req.column.table.as_ref().map_or("", |t| t.value.as_str());
    let return_type = match cfg.policy {
        TypingPolicy::None => req.ty.erased().hint(),
        _ => req.ty.hint(),
    };
    let out_ty = effective_type(req.ty, cfg.policy);
    let automaton = automaton_for(backend, req.ty, cfg)?;
    let vocab = backend.vocabulary();
    let prompt_for = |v: &SqlValue| -> Result<(Prompt, Vec<TokenId>, Vec<TokenId>)> {
        let context = match &req.searcher {
            Some(s) => {
                let query = if req.question.contains("{}") {
                    req.question.replacen("{}", &v.to_string(), 1)
                } else {
                    format!("{} {}", req.question, v)
                };
                Some(s.context(&query))
            }
            None => None,
        };
        let p = map_prompt(req.question, &return_type, table, &req.column.column.value, v, context.as_deref());
        let prefix = vocab.encode(&p.prefix)?;
        let suffix = vocab.encode(&p.suffix)?;
        Ok((p, prefix, suffix))
    };
    if values.is_empty() {
        return Ok(MapOutput {
            rows: Vec::new(),
            raw: Vec::new(),
            prefix_tokens: 0,
            stats: GenerationStats::default(),
        });
    }
    let (_, prefix_ids, first_suffix) = prompt_for(&values[0])?;
    let mut base = PrefixCacheSession::new(prefix_ids.clone());
    let run = |session: &mut PrefixCacheSession, suffix: &[TokenId]| -> Result<String> {
        let ids: Vec<TokenId> = prefix_ids.iter().chain(suffix).copied().collect();
        Ok(generate(backend, session, &ids, automaton.as_ref(), cfg))
    };
    let first = run(&mut base, &first_suffix)?;
    let one = |v: &SqlValue| -> Result<(String, CacheStats)> {
        let (_, _, suffix) = prompt_for(v)?;
        let mut s = base.fork();
        let raw = run(&mut s, &suffix)?;
        Ok((raw, s.stats()))
    };
    let rest: Vec<Result<(String, CacheStats)>> = if backend.concurrency_safe() {
        values[1..].par_iter().map(one).collect()
    } else {
        values[1..].iter().map(one).collect()
    };
    let mut stats = GenerationStats {
        generations: 1,
        cache: base.stats(),
    };
    let mut raws = vec![first];
    for r in rest {
        let (raw, s) = r?;
        stats.generations += 1;
        stats.cache.add(&s);
        raws.push(raw);
    }
    let mut rows = Vec::with_capacity(values.len());
    for (v, raw) in values.iter().zip(&raws) {
        let out = match coerce_output(raw, &out_ty)? {
            Coerced::Scalar(s) => s,
            Coerced::List(items) => SqlValue::Text(
                items.iter().map(SqlValue::to_string).collect::<Vec<_>>().join(", "),
            ),
        };
        rows.push((v.clone(), out));
    }
    Ok(MapOutput {
        rows,
        raw: raws,
        prefix_tokens: prefix_ids.len(),
        stats,
    })
}
