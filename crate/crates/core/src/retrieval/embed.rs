//! Sentence embedders.

use crate::error::{Error, Result};

pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in persisted stores.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    /// Unit-norm vector of length `dim()`; the zero vector when the text
    /// has no features.
    fn embed(&self, text: &str) -> Vec<f64>;
}

pub const DEFAULT_DIM: usize = 256;

/// Signed feature hashing of character n-grams (n = 3..=5 over the
/// lowercased, space-padded text) and whole words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    pub dim: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        HashedNgramEmbedder { dim: DEFAULT_DIM }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashedNgramEmbedder {
    const ID_PREFIX: &'static str = "hashed-ngram-";

    fn add(&self, v: &mut [f64], feature: &[u8]) {
        let h = fnv1a(feature);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % self.dim as u64) as usize] += sign;
    }
}

impl Embedder for HashedNgramEmbedder {
    fn id(&self) -> String {
        format!("{}{}", Self::ID_PREFIX, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        for n in 3..=5 {
            for w in padded.windows(n) {
                let gram: String = w.iter().collect();
                if !gram.trim().is_empty() {
                    self.add(&mut v, gram.as_bytes());
                }
            }
        }
        for w in &words {
            self.add(&mut v, format!("w:{w}").as_bytes());
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// Embedder registered under `id`.
pub fn embedder_from_id(id: &str) -> Result<Box<dyn Embedder>> {
    id.strip_prefix(HashedNgramEmbedder::ID_PREFIX)
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d > 0)
        .map(|dim| Box::new(HashedNgramEmbedder { dim }) as Box<dyn Embedder>)
        .ok_or_else(|| Error::Store(format!("unknown embedder `{id}`")))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let e = HashedNgramEmbedder::default();
        let a = e.embed("Walter Payton");
        assert_eq!(a, e.embed("Walter Payton"));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(e.embed("").iter().all(|&x| x == 0.0));
    }

    #[test]
    fn registry_round_trips() {
        let e = HashedNgramEmbedder { dim: 64 };
        assert_eq!(embedder_from_id(&e.id()).unwrap().dim(), 64);
        assert!(embedder_from_id("mpnet").is_err());
    }
}
