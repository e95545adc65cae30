//! Next-token scoring backends and decoding.

pub mod cache;
pub mod constrain;
pub mod decode;
pub mod mock;
pub mod trie;

use crate::error::{Error, Result};

pub use cache::{CacheStats, PrefixCacheSession};
pub use constrain::TokenAutomaton;
pub use decode::{generate_constrained, generate_unconstrained, Generation};
pub use mock::{MockBackend, MockModelSpec};
pub use trie::TokenTrie;

pub type TokenId = u32;

/// A fixed, ordered token vocabulary. The end-of-sequence token is not part
/// of the list; its id is `len()`.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    trie: TokenTrie,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::ModelSpec("vocabulary is empty".into()));
        }
        if tokens.iter().any(String::is_empty) {
            return Err(Error::ModelSpec("vocabulary contains an empty token".into()));
        }
        let trie = TokenTrie::new(tokens.iter().map(String::as_str));
        Ok(Vocabulary { tokens, trie })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.tokens.len() as TokenId
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get(id as usize).map_or("", String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn trie(&self) -> &TokenTrie {
        &self.trie
    }

    /// Greedy longest-match tokenization.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            match self.trie.longest_match(&bytes[i..]) {
                Some((id, len)) => {
                    out.push(id);
                    i += len;
                }
                None => {
                    let ch = text[i..].chars().next().unwrap_or('\u{fffd}');
                    return Err(Error::Tokenization(format!(
                        "character {ch:?} at byte {i} is not in the vocabulary"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&id| self.token(id)).collect()
    }
}

/// Next-token scorer over a fixed vocabulary.
pub trait ModelBackend: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Log-weights for every token after `prompt` followed by `generated`;
    /// the last entry is end-of-sequence. Must be a pure function of its
    /// inputs.
    fn score(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<f64>;

    /// Whether `score` may be called from several threads at once.
    fn concurrency_safe(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_is_greedy_longest_match() {
        let v = Vocabulary::new(vec!["a".into(), "b".into(), "ab".into(), "abb".into()]).unwrap();
        assert_eq!(v.encode("abba").unwrap(), vec![3, 0]);
        assert_eq!(v.decode(&[3, 0]), "abba");
        assert!(matches!(v.encode("c"), Err(Error::Tokenization(_))));
        assert_eq!(v.eos(), 4);
    }
}
