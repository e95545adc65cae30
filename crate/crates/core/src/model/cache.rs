use serde::{Deserialize, Serialize};

use super::{ModelBackend, TokenId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    /// Tokens run through the model, one forward pass each.
    pub forward_passes: u64,
    /// The subset of `forward_passes` spent on the shared prefix.
    pub prefix_forward_passes: u64,
    /// Generations that started with the prefix already cached.
    pub cache_hits: u64,
}

impl CacheStats {
    pub fn add(&mut self, other: &CacheStats) {
        self.forward_passes += other.forward_passes;
        self.prefix_forward_passes += other.prefix_forward_passes;
        self.cache_hits += other.cache_hits;
    }
}

/// Key/value-cache bookkeeping for one shared prompt prefix.
///
/// Scoring a context only costs the tokens past the longest prefix already
/// processed; the shared prefix stays cached once it has been processed.
#[derive(Debug, Clone)]
pub struct PrefixCacheSession {
    prefix: Vec<TokenId>,
    prefix_cached: bool,
    processed: Vec<TokenId>,
    stats: CacheStats,
}

impl PrefixCacheSession {
    pub fn new(prefix: Vec<TokenId>) -> Self {
        PrefixCacheSession {
            prefix,
            prefix_cached: false,
            processed: Vec::new(),
            stats: CacheStats::default(),
        }
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    /// A copy sharing the cached prefix but with fresh counters, for
    /// scoring on another thread.
    pub fn fork(&self) -> Self {
        PrefixCacheSession {
            prefix: self.prefix.clone(),
            prefix_cached: self.prefix_cached,
            processed: if self.prefix_cached {
                self.prefix.clone()
            } else {
                Vec::new()
            },
            stats: CacheStats::default(),
        }
    }

    /// Marks the start of a generation for `prompt`.
    pub fn begin(&mut self, prompt: &[TokenId]) {
        if self.prefix_cached && !self.prefix.is_empty() && prompt.starts_with(&self.prefix) {
            self.stats.cache_hits += 1;
        }
    }

    pub fn score_forward<B: ModelBackend + ?Sized>(
        &mut self,
        backend: &B,
        prompt: &[TokenId],
        generated: &[TokenId],
    ) -> Vec<f64> {
        let total = prompt.len() + generated.len();
        let at = |i: usize| {
            if i < prompt.len() {
                prompt[i]
            } else {
                generated[i - prompt.len()]
            }
        };
        let mut reused = self
            .processed
            .iter()
            .enumerate()
            .take_while(|&(i, &t)| i < total && at(i) == t)
            .count();
        let has_prefix = !self.prefix.is_empty()
            && total >= self.prefix.len()
            && self.prefix.iter().enumerate().all(|(i, &t)| at(i) == t);
        if has_prefix && self.prefix_cached {
            reused = reused.max(self.prefix.len());
        }
        self.stats.forward_passes += (total - reused) as u64;
        if has_prefix && reused < self.prefix.len() {
            self.stats.prefix_forward_passes += (self.prefix.len() - reused) as u64;
        }
        if has_prefix {
            self.prefix_cached = true;
        }
        self.processed.clear();
        self.processed.extend((0..total).map(at));
        backend.score(prompt, generated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MockBackend, MockModelSpec};

    #[test]
    fn shared_prefix_is_scored_once() {
        let m = MockBackend::new(MockModelSpec::default()).unwrap();
        let prefix: Vec<TokenId> = (0..100).collect();
        let mut s = PrefixCacheSession::new(prefix.clone());
        for tail in [[200u32, 201], [202, 203]] {
            let prompt: Vec<TokenId> = prefix.iter().copied().chain(tail).collect();
            s.begin(&prompt);
            s.score_forward(&m, &prompt, &[]);
            s.score_forward(&m, &prompt, &[5]);
        }
        let st = s.stats();
        assert_eq!(st.prefix_forward_passes, 100);
        assert_eq!(st.cache_hits, 1);
        assert_eq!(st.forward_passes, 100 + 2 + 1 + 2 + 1);
    }

    #[test]
    fn disjoint_prompts_never_hit() {
        let m = MockBackend::new(MockModelSpec::default()).unwrap();
        let mut s = PrefixCacheSession::new(vec![1, 2, 3]);
        for prompt in [[7u32, 8], [9, 10]] {
            s.begin(&prompt);
            s.score_forward(&m, &prompt, &[]);
        }
        assert_eq!(s.stats().cache_hits, 0);
        assert_eq!(s.stats().prefix_forward_passes, 0);
    }
}
