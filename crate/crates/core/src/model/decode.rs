//! Greedy decoding, with or without a pattern constraint.

use super::{ModelBackend, PrefixCacheSession, TokenAutomaton, TokenId};
use crate::error::Result;
use crate::types::ConstraintPattern;

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub tokens: Vec<TokenId>,
    /// The token budget ran out before the model chose to stop.
    pub truncated: bool,
}

/// Index of the highest score among `candidates`; ties go to the earliest.
fn argmax(scores: &[f64], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for c in candidates {
        if best.map_or(true, |b| scores[c] > scores[b]) {
            best = Some(c);
        }
    }
    best
}

pub fn decode_unconstrained<B: ModelBackend + ?Sized>(
    backend: &B,
    session: &mut PrefixCacheSession,
    prompt: &[TokenId],
    max_tokens: usize,
    stop: &[String],
) -> Generation {
    let vocab = backend.vocabulary();
    let eos = vocab.eos() as usize;
    let mut tokens = Vec::new();
    let mut text = String::new();
    session.begin(prompt);
    while tokens.len() < max_tokens {
        let scores = session.score_forward(backend, prompt, &tokens);
        let best = argmax(&scores, 0..=eos).unwrap_or(eos);
        if best == eos {
            return Generation {
                text,
                tokens,
                truncated: false,
            };
        }
        tokens.push(best as TokenId);
        text.push_str(vocab.token(best as TokenId));
        if let Some(cut) = stop
            .iter()
            .filter(|s| !s.is_empty())
            .filter_map(|s| text.find(s.as_str()))
            .min()
        {
            text.truncate(cut);
            return Generation {
                text,
                tokens,
                truncated: false,
            };
        }
    }
    Generation {
        text,
        tokens,
        truncated: true,
    }
}

pub fn decode_constrained<B: ModelBackend + ?Sized>(
    backend: &B,
    session: &mut PrefixCacheSession,
    prompt: &[TokenId],
    automaton: &TokenAutomaton,
    max_tokens: usize,
) -> Generation {
    let vocab = backend.vocabulary();
    let eos = vocab.eos() as usize;
    let mut state = automaton.start();
    let mut tokens: Vec<TokenId> = Vec::new();
    let mut truncated = false;
    session.begin(prompt);
    loop {
        let edges = automaton.allowed(state);
        if edges.is_empty() {
            break;
        }
        if tokens.len() >= max_tokens {
            // Finish with the shortest accepted continuation.
            tokens.extend(automaton.shortest_completion(state));
            truncated = true;
            break;
        }
        let scores = session.score_forward(backend, prompt, &tokens);
        let best = argmax(&scores, edges.iter().map(|&(t, _)| t as usize))
            .expect("edges are non-empty");
        if automaton.accepting(state) && scores[eos] > scores[best] {
            break;
        }
        state = automaton
            .step(state, best as TokenId)
            .expect("chosen token is an allowed edge");
        tokens.push(best as TokenId);
    }
    Generation {
        text: vocab.decode(&tokens),
        tokens,
        truncated,
    }
}

/// Greedy decoding of `prompt` until end-of-sequence, `max_tokens`, or the
/// first occurrence of a stop string (which is cut off).
pub fn generate_unconstrained<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    max_tokens: usize,
    stop: &[String],
) -> Result<Generation> {
    let ids = backend.vocabulary().encode(prompt)?;
    let mut session = PrefixCacheSession::new(Vec::new());
    Ok(decode_unconstrained(backend, &mut session, &ids, max_tokens, stop))
}

/// Greedy decoding restricted to strings matching `pattern` exactly.
pub fn generate_constrained<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    pattern: &ConstraintPattern,
) -> Result<Generation> {
    let ids = backend.vocabulary().encode(prompt)?;
    let automaton = TokenAutomaton::compile(&pattern.pattern, backend.vocabulary())?;
    let mut session = PrefixCacheSession::new(Vec::new());
    Ok(decode_constrained(
        backend,
        &mut session,
        &ids,
        &automaton,
        DEFAULT_MAX_TOKENS,
    ))
}

pub const DEFAULT_MAX_TOKENS: usize = 128;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MockBackend, MockModelSpec};
    use crate::types::{type_to_pattern, InferredType, TypeConfig};

    fn constrained(completion: &str, t: &InferredType) -> String {
        let m = MockBackend::new(MockModelSpec::scripted([("Q:", completion)])).unwrap();
        let p = type_to_pattern(t, &TypeConfig::default()).unwrap();
        generate_constrained(&m, "Q: question", &p).unwrap().text
    }

    #[test]
    fn verbose_answer_constrained_to_int() {
        assert_eq!(constrained("The answer is 40.", &InferredType::Int), "40");
    }

    #[test]
    fn literal_alignment() {
        let t = InferredType::Literal(vec!["washington dc".into(), "san jose".into()]);
        assert_eq!(constrained("Washington D.C.", &t), "washington dc");
    }

    #[test]
    fn singleton_language_is_forced() {
        let t = InferredType::Literal(vec!["x".into()]);
        assert_eq!(constrained("something else entirely", &t), "x");
    }

    #[test]
    fn booleans() {
        assert_eq!(constrained("True", &InferredType::Bool), "True");
        assert_eq!(constrained("no", &InferredType::Bool), "False");
    }
}
