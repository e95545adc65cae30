//! Deterministic scripted backend.
//!
//! Each prompt selects one behavior (the first whose trigger occurs in the
//! prompt). The behavior's completion is the text the mock "wants" to say;
//! tokens score by how far they extend an alignment with that text, so
//! unconstrained decoding reproduces it verbatim while constrained decoding
//! drifts toward the closest allowed spelling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelBackend, TokenId, Vocabulary};
use crate::error::{Error, Result};

/// Reward per aligned character, and for stopping at the end.
const ALIGN: f64 = 1.0;
/// Penalty per character of the completion skipped to reach an alignment.
const SKIP: f64 = 0.01;
/// Tie-break in favour of matching case exactly.
const CASE: f64 = 0.004;
/// Cost of stopping at a word boundary short of the full completion.
const EARLY_STOP: f64 = 0.75;
/// Per generated character that matches nothing.
const UNALIGNED_TOKEN: f64 = -10.0;
const UNALIGNED_STOP: f64 = -5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TokenizerSpec {
    /// `"char"`: one token per character.
    Named(String),
    /// Character tokens plus the listed multi-character tokens.
    Vocab { vocab: Vec<String> },
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        TokenizerSpec::Named("char".into())
    }
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub trigger: String,
    pub completion: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockModelSpec {
    #[serde(default)]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub behaviors: Vec<Behavior>,
    #[serde(default)]
    pub default_completion: String,
    /// Characters added to the vocabulary beyond the built-in set.
    #[serde(default)]
    pub extra_chars: String,
    /// Added to the end-of-sequence score everywhere.
    #[serde(default)]
    pub eos_bias: f64,
}

impl MockModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelSpec(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Spec with one behavior per `(trigger, completion)` pair.
    pub fn scripted<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        MockModelSpec {
            behaviors: pairs
                .into_iter()
                .map(|(trigger, completion)| Behavior {
                    trigger: trigger.into(),
                    completion: completion.into(),
                    weight: 1.0,
                })
                .collect(),
            ..MockModelSpec::default()
        }
    }
}

struct Script {
    completion: Vec<char>,
    lowered: Vec<char>,
    weight: f64,
}

impl Script {
    fn new(completion: &str, weight: f64) -> Self {
        let completion: Vec<char> = completion.chars().collect();
        let lowered: Vec<char> = completion.iter().map(|&c| lower(c)).collect();
        Script {
            completion,
            lowered,
            weight,
        }
    }
}

fn lower(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

pub struct MockBackend {
    vocab: Vocabulary,
    triggers: Vec<String>,
    scripts: Vec<Script>,
    default: Script,
    eos_bias: f64,
    lowered_tokens: Vec<Vec<char>>,
}

impl MockBackend {
    pub fn new(spec: MockModelSpec) -> Result<Self> {
        if let Some(b) = spec.behaviors.iter().find(|b| !(b.weight > 0.0)) {
            return Err(Error::ModelSpec(format!(
                "behavior for trigger {:?} has non-positive weight {}",
                b.trigger, b.weight
            )));
        }
        let mut chars: Vec<char> = (0x20u8..=0x7e).map(char::from).collect();
        chars.extend(['\n', '\t']);
        chars.extend((0xa0u32..=0xff).filter_map(char::from_u32));
        chars.extend(spec.default_completion.chars());
        chars.extend(spec.extra_chars.chars());
        for b in &spec.behaviors {
            chars.extend(b.completion.chars());
            chars.extend(b.trigger.chars());
        }
        chars.sort_unstable();
        chars.dedup();
        let mut tokens: Vec<String> = chars.into_iter().map(String::from).collect();
        match &spec.tokenizer {
            TokenizerSpec::Named(name) if name == "char" => {}
            TokenizerSpec::Named(other) => {
                return Err(Error::ModelSpec(format!("unknown tokenizer {other:?}")))
            }
            TokenizerSpec::Vocab { vocab } => {
                for t in vocab {
                    if !t.is_empty() && !tokens.contains(t) {
                        tokens.push(t.clone());
                    }
                }
            }
        }
        let vocab = Vocabulary::new(tokens)?;
        let lowered_tokens = vocab
            .tokens()
            .iter()
            .map(|t| t.chars().map(lower).collect())
            .collect();
        Ok(MockBackend {
            triggers: spec.behaviors.iter().map(|b| b.trigger.clone()).collect(),
            scripts: spec
                .behaviors
                .iter()
                .map(|b| Script::new(&b.completion, b.weight))
                .collect(),
            default: Script::new(&spec.default_completion, 1.0),
            eos_bias: spec.eos_bias,
            vocab,
            lowered_tokens,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::new(MockModelSpec::from_path(path)?)
    }

    fn script_for(&self, prompt: &str) -> &Script {
        self.triggers
            .iter()
            .position(|t| prompt.contains(t.as_str()))
            .map_or(&self.default, |i| &self.scripts[i])
    }

    /// The completion a prompt selects.
    pub fn completion_for(&self, prompt: &str) -> String {
        self.script_for(prompt).completion.iter().collect()
    }
}

/// Alignment state: best score of the text generated so far, indexed by
/// how many completion characters it has consumed. Generated characters
/// match completion characters in order; skipped completion characters and
/// unmatched generated characters are penalized.
type Alignment = Vec<f64>;

fn start_alignment(s: &Script) -> Alignment {
    let mut a = vec![f64::NEG_INFINITY; s.lowered.len() + 1];
    a[0] = 0.0;
    a
}

fn advance(a: &Alignment, lowered: char, exact: char, s: &Script) -> Alignment {
    let mut out: Alignment = a.iter().map(|v| v + UNALIGNED_TOKEN).collect();
    // Running max of a[j] + SKIP * j, so a match at position p costs
    // SKIP * (p - j) for the characters skipped since state j.
    let mut reach = f64::NEG_INFINITY;
    for p in 0..s.lowered.len() {
        reach = reach.max(a[p] + SKIP * p as f64);
        if s.lowered[p] == lowered && reach.is_finite() {
            let case = if s.completion[p] == exact { CASE } else { 0.0 };
            out[p + 1] = out[p + 1].max(reach - SKIP * p as f64 + ALIGN + case);
        }
    }
    out
}

fn best(a: &Alignment) -> f64 {
    a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn eos_score(a: &Alignment, s: &Script) -> f64 {
    let n = s.lowered.len();
    (0..=n)
        .map(|j| {
            let stop = if j == n {
                ALIGN
            } else if j > 0 && !s.lowered[j].is_alphanumeric() {
                -EARLY_STOP
            } else {
                UNALIGNED_STOP
            };
            a[j] + stop
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

impl ModelBackend for MockBackend {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<f64> {
        let prompt_text = self.vocab.decode(prompt);
        let script = self.script_for(&prompt_text);
        let mut a = start_alignment(script);
        for c in self.vocab.decode(generated).chars() {
            a = advance(&a, lower(c), c, script);
        }
        let base = best(&a);
        let mut scores = Vec::with_capacity(self.vocab.len() + 1);
        for (id, tok) in self.vocab.tokens().iter().enumerate() {
            let lowered = &self.lowered_tokens[id];
            let v = if lowered.iter().any(|c| script.lowered.contains(c)) {
                let mut ext = a.clone();
                for (&l, c) in lowered.iter().zip(tok.chars()) {
                    ext = advance(&ext, l, c, script);
                }
                best(&ext)
            } else {
                base + UNALIGNED_TOKEN * lowered.len() as f64
            };
            scores.push(script.weight * v);
        }
        scores.push(script.weight * eos_score(&a, script) + self.eos_bias);
        scores
    }

    fn concurrency_safe(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::decode::generate_unconstrained;

    fn backend(pairs: &[(&str, &str)]) -> MockBackend {
        MockBackend::new(MockModelSpec::scripted(pairs.iter().copied())).unwrap()
    }

    #[test]
    fn first_matching_trigger_wins() {
        let m = backend(&[("Lebron", "The answer is 40."), ("James", "nope")]);
        assert_eq!(m.completion_for("How old is Lebron James?"), "The answer is 40.");
        assert_eq!(m.completion_for("unrelated"), "");
    }

    #[test]
    fn unconstrained_reproduces_completion() {
        let m = backend(&[("How old is Lebron James", "The answer is 40.")]);
        let out = generate_unconstrained(&m, "How old is Lebron James?", 64, &[]).unwrap();
        assert_eq!(out.text, "The answer is 40.");
    }

    #[test]
    fn empty_default_yields_empty_output() {
        let m = MockBackend::new(MockModelSpec::default()).unwrap();
        assert_eq!(generate_unconstrained(&m, "anything", 8, &[]).unwrap().text, "");
    }

    #[test]
    fn stop_strings_truncate() {
        let m = backend(&[("q", "first line\nsecond line")]);
        let out = generate_unconstrained(&m, "q", 64, &["\n".to_string()]).unwrap();
        assert_eq!(out.text, "first line");
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = MockModelSpec::from_json(
            r#"{"behaviors": [{"trigger": "a", "completion": "b", "weight": 0}]}"#,
        )
        .unwrap();
        assert!(MockBackend::new(spec).is_err());
        let spec = MockModelSpec::from_json(r#"{"tokenizer": "bpe"}"#).unwrap();
        assert!(MockBackend::new(spec).is_err());
        let spec = MockModelSpec::from_json(r#"{"tokenizer": {"vocab": ["Wash", "ington"]}}"#)
            .unwrap();
        let m = MockBackend::new(spec).unwrap();
        assert_eq!(m.vocabulary().encode("Washington").unwrap().len(), 2);
    }
}
