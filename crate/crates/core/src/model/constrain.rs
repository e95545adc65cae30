//! Intersection of a pattern DFA with the token vocabulary.
//!
//! The automaton's states are the DFA states reachable from the start by
//! whole tokens. An edge exists for a token when walking its bytes never
//! hits the dead state, and it is kept only when some accepted string is
//! still reachable afterwards. Masks computed from it are therefore exact:
//! a token is offered iff an accepted output extends the current one
//! through that token.

use std::collections::{HashMap, VecDeque};

use regex_automata::dfa::{dense, Automaton, StartKind};
use regex_automata::nfa::thompson;
use regex_automata::util::primitives::StateID;
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};

use super::{TokenId, Vocabulary};
use crate::error::{Error, Result};

const MAX_STATES: usize = 200_000;

#[derive(Debug, Clone, Default)]
struct State {
    /// Sorted by token id; only edges into live states.
    edges: Vec<(TokenId, usize)>,
    accepting: bool,
}

#[derive(Debug, Clone)]
pub struct TokenAutomaton {
    states: Vec<State>,
    pattern: String,
}

fn build_dfa(pattern: &str) -> Result<dense::DFA<Vec<u32>>> {
    dense::Builder::new()
        .configure(
            dense::Config::new()
                .match_kind(MatchKind::All)
                .start_kind(StartKind::Anchored),
        )
        .syntax(syntax::Config::new().unicode(false).utf8(false))
        .thompson(thompson::Config::new().utf8(false))
        .build(pattern)
        .map_err(|e| Error::Pattern(format!("{pattern}: {e}")))
}

/// Full-match test of `text` against `pattern` using the same compilation
/// path as the decoder.
pub fn pattern_matches(pattern: &str, text: &str) -> Result<bool> {
    let dfa = build_dfa(pattern)?;
    let mut s = dfa
        .start_state_forward(&Input::new("").anchored(Anchored::Yes))
        .map_err(|e| Error::Pattern(e.to_string()))?;
    for &b in text.as_bytes() {
        s = dfa.next_state(s, b);
        if dfa.is_dead_state(s) {
            return Ok(false);
        }
    }
    Ok(dfa.is_match_state(dfa.next_eoi_state(s)))
}

impl TokenAutomaton {
    pub fn compile(pattern: &str, vocab: &Vocabulary) -> Result<Self> {
        let dfa = build_dfa(pattern)?;
        let start = dfa
            .start_state_forward(&Input::new("").anchored(Anchored::Yes))
            .map_err(|e| Error::Pattern(e.to_string()))?;
        let trie = vocab.trie();

        let mut index: HashMap<StateID, usize> = HashMap::new();
        let mut ids: Vec<StateID> = Vec::new();
        let mut raw_edges: Vec<Vec<(TokenId, usize)>> = Vec::new();
        let mut queue = VecDeque::new();
        index.insert(start, 0);
        ids.push(start);
        raw_edges.push(Vec::new());
        queue.push_back(0usize);

        while let Some(si) = queue.pop_front() {
            let mut edges = Vec::new();
            let mut stack = vec![(trie.root(), ids[si])];
            while let Some((node, ds)) = stack.pop() {
                for &(byte, child) in trie.children(node) {
                    let next = dfa.next_state(ds, byte);
                    if dfa.is_dead_state(next) || dfa.is_quit_state(next) {
                        continue;
                    }
                    if let Some(tok) = trie.token(child) {
                        let target = match index.get(&next) {
                            Some(&t) => t,
                            None => {
                                if ids.len() >= MAX_STATES {
                                    return Err(Error::Pattern(format!(
                                        "constraint automaton for `{pattern}` exceeds {MAX_STATES} states"
                                    )));
                                }
                                let t = ids.len();
                                index.insert(next, t);
                                ids.push(next);
                                raw_edges.push(Vec::new());
                                queue.push_back(t);
                                t
                            }
                        };
                        edges.push((tok, target));
                    }
                    stack.push((child, next));
                }
            }
            edges.sort_unstable();
            raw_edges[si] = edges;
        }

        let accepting: Vec<bool> = ids
            .iter()
            .map(|&s| dfa.is_match_state(dfa.next_eoi_state(s)))
            .collect();

        // Backward reachability from accepting states.
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for (from, edges) in raw_edges.iter().enumerate() {
            for &(_, to) in edges {
                reverse[to].push(from);
            }
        }
        let mut live = accepting.clone();
        let mut work: Vec<usize> = (0..ids.len()).filter(|&i| accepting[i]).collect();
        while let Some(s) = work.pop() {
            for &p in &reverse[s] {
                if !live[p] {
                    live[p] = true;
                    work.push(p);
                }
            }
        }

        if !live[0] {
            // Distinguish "nothing matches" from "nothing the vocabulary can
            // spell matches".
            let byte_language_empty = !byte_language_nonempty(&dfa, start);
            return Err(if byte_language_empty {
                Error::EmptyLanguage(pattern.to_string())
            } else {
                Error::Tokenization(format!(
                    "no output matching `{pattern}` can be spelled with the vocabulary"
                ))
            });
        }

        let states = raw_edges
            .into_iter()
            .zip(accepting)
            .map(|(edges, accepting)| State {
                edges: edges.into_iter().filter(|&(_, t)| live[t]).collect(),
                accepting,
            })
            .collect();
        Ok(TokenAutomaton {
            states,
            pattern: pattern.to_string(),
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Tokens allowed from `state`, with their successor states.
    pub fn allowed(&self, state: usize) -> &[(TokenId, usize)] {
        &self.states[state].edges
    }

    pub fn accepting(&self, state: usize) -> bool {
        self.states[state].accepting
    }

    pub fn step(&self, state: usize, token: TokenId) -> Option<usize> {
        let edges = &self.states[state].edges;
        edges
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|i| edges[i].1)
    }

    /// Fewest tokens leading from `state` to acceptance, preferring lower
    /// token ids among equally short paths.
    pub fn shortest_completion(&self, state: usize) -> Vec<TokenId> {
        let mut prev: Vec<Option<(usize, TokenId)>> = vec![None; self.states.len()];
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([state]);
        seen[state] = true;
        while let Some(s) = queue.pop_front() {
            if self.states[s].accepting {
                let mut path = Vec::new();
                let mut cur = s;
                while let Some((p, t)) = prev[cur] {
                    path.push(t);
                    cur = p;
                }
                path.reverse();
                return path;
            }
            for &(t, n) in &self.states[s].edges {
                if !seen[n] {
                    seen[n] = true;
                    prev[n] = Some((s, t));
                    queue.push_back(n);
                }
            }
        }
        Vec::new()
    }
}

fn byte_language_nonempty(dfa: &dense::DFA<Vec<u32>>, start: StateID) -> bool {
    let mut seen = std::collections::HashSet::from([start]);
    let mut work = vec![start];
    while let Some(s) = work.pop() {
        if dfa.is_match_state(dfa.next_eoi_state(s)) {
            return true;
        }
        for b in 0..=255u8 {
            let n = dfa.next_state(s, b);
            if !dfa.is_dead_state(n) && seen.insert(n) {
                work.push(n);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn char_vocab(chars: &str) -> Vocabulary {
        Vocabulary::new(chars.chars().map(String::from).collect()).unwrap()
    }

    #[test]
    fn masks_follow_the_pattern() {
        let v = char_vocab("0123456789ab");
        let a = TokenAutomaton::compile(r"\d+", &v).unwrap();
        let allowed: Vec<_> = a.allowed(a.start()).iter().map(|e| e.0).collect();
        assert_eq!(allowed, (0..10).collect::<Vec<_>>());
        assert!(!a.accepting(a.start()));
        let s = a.step(a.start(), 4).unwrap();
        assert!(a.accepting(s));
    }

    #[test]
    fn empty_language_is_reported() {
        let v = char_vocab("ab");
        assert!(matches!(
            TokenAutomaton::compile(r"[^\x00-\xff]", &v),
            Err(Error::EmptyLanguage(_))
        ));
        assert!(matches!(
            TokenAutomaton::compile("c", &v),
            Err(Error::Tokenization(_))
        ));
    }

    #[test]
    fn dead_ends_are_pruned() {
        // "ab" is spellable only through the multi-character token.
        let v = Vocabulary::new(vec!["a".into(), "ab".into(), "x".into()]).unwrap();
        let a = TokenAutomaton::compile("ab", &v).unwrap();
        let allowed: Vec<_> = a.allowed(a.start()).iter().map(|e| e.0).collect();
        assert_eq!(allowed, vec![1]);
        assert_eq!(a.shortest_completion(a.start()), vec![1]);
    }

    #[test]
    fn non_ascii_literals() {
        assert!(pattern_matches("josé", "josé").unwrap());
        assert!(!pattern_matches(r"\d+", "40x").unwrap());
        assert!(pattern_matches(r"(True|False)", "False").unwrap());
    }
}
