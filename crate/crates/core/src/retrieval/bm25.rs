use std::collections::BTreeMap;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    pub(crate) k1: f64,
    pub(crate) b: f64,
    pub(crate) doc_lens: Vec<u32>,
    /// term -> (document, term frequency), documents ascending.
    pub(crate) postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a str>, k1: f64, b: f64) -> Self {
        let mut doc_lens = Vec::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (d, text) in docs.into_iter().enumerate() {
            let tokens = tokenize(text);
            doc_lens.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term).or_default().push((d as u32, n));
            }
        }
        Bm25Index {
            k1,
            b,
            doc_lens,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_lens.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of every document for `query`. Repeated query terms count
    /// once.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if self.is_empty() {
            return out;
        }
        let avgdl = self.doc_lens.iter().map(|&l| l as f64).sum::<f64>() / self.len() as f64;
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        for term in terms {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for &(d, tf) in list {
                let tf = tf as f64;
                let len = self.doc_lens[d as usize] as f64;
                let norm = if avgdl > 0.0 { len / avgdl } else { 0.0 };
                out[d as usize] +=
                    idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_lowercases_alphanumeric_runs() {
        assert_eq!(tokenize("Walter-Payton's 1,000 YARDS"), vec!["walter", "payton", "s", "1", "000", "yards"]);
    }

    #[test]
    fn unseen_terms_score_zero() {
        let idx = Bm25Index::build(["a b", "c"], DEFAULT_K1, DEFAULT_B);
        assert_eq!(idx.scores("zzz"), vec![0.0, 0.0]);
        assert!(Bm25Index::build([], DEFAULT_K1, DEFAULT_B).scores("a").is_empty());
    }
}
