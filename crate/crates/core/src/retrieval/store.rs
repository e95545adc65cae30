use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bm25::{Bm25Index, DEFAULT_B, DEFAULT_K1};
use super::embed::{cosine, embedder_from_id, Embedder, HashedNgramEmbedder};
use super::fusion::{rank_by_score, reciprocal_rank_fusion, RRF_CONSTANT};
use super::split::split_sentences;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"BKSTORE\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub index: usize,
    pub doc_id: String,
    pub text: String,
    pub score: f64,
}

/// Immutable after construction; safe to search from many threads.
#[derive(Clone)]
pub struct DocumentStore {
    sentences: Vec<Sentence>,
    lexical: Bm25Index,
    vectors: Vec<Vec<f64>>,
    embedder: Arc<dyn Embedder>,
}

impl fmt::Debug for DocumentStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DocumentStore")
            .field("sentences", &self.sentences.len())
            .field("embedder", &self.embedder.id())
            .finish()
    }
}

impl DocumentStore {
    pub fn build(documents: &[Document], embedder: Arc<dyn Embedder>) -> Self {
        let sentences: Vec<Sentence> = documents
            .iter()
            .flat_map(|d| {
                split_sentences(&d.text).into_iter().map(|text| Sentence {
                    doc_id: d.id.clone(),
                    text,
                })
            })
            .collect();
        let lexical = Bm25Index::build(sentences.iter().map(|s| s.text.as_str()), DEFAULT_K1, DEFAULT_B);
        let vectors = sentences.iter().map(|s| embedder.embed(&s.text)).collect();
        DocumentStore {
            sentences,
            lexical,
            vectors,
            embedder,
        }
    }

    /// Builds from plain texts with ids `0`, `1`, ... and the default
    /// embedder.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                id: i.to_string(),
                text: t.as_ref().to_string(),
            })
            .collect();
        Self::build(&docs, Arc::new(HashedNgramEmbedder::default()))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn lexical(&self) -> &Bm25Index {
        &self.lexical
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// Top `k` sentences (clamped to the store size) by reciprocal rank
    /// fusion of the BM25 and cosine rankings.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let lexical = rank_by_score(&self.lexical.scores(query));
        let q = self.embedder.embed(query);
        let dense_scores: Vec<f64> = self.vectors.iter().map(|v| cosine(&q, v)).collect();
        let dense = rank_by_score(&dense_scores);
        reciprocal_rank_fusion(&lexical, &dense, RRF_CONSTANT)
            .into_iter()
            .take(k)
            .map(|(i, score)| SearchHit {
                index: i,
                doc_id: self.sentences[i].doc_id.clone(),
                text: self.sentences[i].text.clone(),
                score,
            })
            .collect()
    }

    /// Serializes to the versioned single-file format: header, sentence
    /// table, postings, document lengths, vectors. Little-endian throughout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        put_u32(&mut w, FORMAT_VERSION);
        put_str(&mut w, &self.embedder.id());
        put_f64(&mut w, self.lexical.k1);
        put_f64(&mut w, self.lexical.b);
        put_u32(&mut w, self.sentences.len() as u32);
        for s in &self.sentences {
            put_str(&mut w, &s.doc_id);
            put_str(&mut w, &s.text);
        }
        put_u32(&mut w, self.lexical.postings.len() as u32);
        for (term, list) in &self.lexical.postings {
            put_str(&mut w, term);
            put_u32(&mut w, list.len() as u32);
            for &(d, tf) in list {
                put_u32(&mut w, d);
                put_u32(&mut w, tf);
            }
        }
        for &l in &self.lexical.doc_lens {
            put_u32(&mut w, l);
        }
        put_u32(&mut w, self.embedder.dim() as u32);
        for v in &self.vectors {
            for &x in v {
                put_f64(&mut w, x);
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Store("not a document store file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Store(format!(
                "unsupported store format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let embedder: Arc<dyn Embedder> = Arc::from(embedder_from_id(&r.string()?)?);
        let k1 = r.f64()?;
        let b = r.f64()?;
        let n = r.u32()? as usize;
        let mut sentences = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            sentences.push(Sentence {
                doc_id: r.string()?,
                text: r.string()?,
            });
        }
        let terms = r.u32()? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = r.string()?;
            let len = r.u32()? as usize;
            let mut list = Vec::with_capacity(len.min(n));
            for _ in 0..len {
                let d = r.u32()?;
                if d as usize >= n {
                    return Err(Error::Store(format!("posting for `{term}` points past the sentence table")));
                }
                list.push((d, r.u32()?));
            }
            postings.insert(term, list);
        }
        let mut doc_lens = Vec::with_capacity(n);
        for _ in 0..n {
            doc_lens.push(r.u32()?);
        }
        let dim = r.u32()? as usize;
        if dim != embedder.dim() {
            return Err(Error::Store(format!(
                "vector dimension {dim} does not match embedder `{}`",
                embedder.id()
            )));
        }
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(r.f64()?);
            }
            vectors.push(v);
        }
        if r.pos != bytes.len() {
            return Err(Error::Store("trailing bytes after store data".into()));
        }
        Ok(DocumentStore {
            sentences,
            lexical: Bm25Index {
                k1,
                b,
                doc_lens,
                postings,
            },
            vectors,
            embedder,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Store("truncated store file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Store(e.to_string()))
    }
}

#[derive(Deserialize)]
struct JsonDocument {
    id: Option<serde_json::Value>,
    text: String,
}

/// Reads documents from a directory of `.txt` files (id = file stem, sorted
/// by file name) or from a JSON-lines file of `{"id": ..., "text": ...}`
/// records (id defaults to the line number).
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
            .collect();
        files.sort();
        return files
            .into_iter()
            .map(|p| {
                Ok(Document {
                    id: p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                    text: std::fs::read_to_string(&p)?,
                })
            })
            .collect();
    }
    let text = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: JsonDocument = serde_json::from_str(line)
            .map_err(|e| Error::Store(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let id = match d.id {
            Some(serde_json::Value::String(s)) => s,
            Some(other) => other.to_string(),
            None => (n + 1).to_string(),
        };
        docs.push(Document { id, text: d.text });
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_counts_sentences() {
        let s = DocumentStore::from_texts(&[
            "Walter Jerry Payton was an American football player. He played for Chicago.",
        ]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.lexical().len(), 2);
        assert_eq!(s.vectors().len(), 2);
    }

    #[test]
    fn empty_store_searches_empty() {
        let s = DocumentStore::from_texts::<&str>(&[]);
        assert!(s.search("anything", 3).is_empty());
    }

    #[test]
    fn bytes_round_trip() {
        let s = DocumentStore::from_texts(&["One fish. Two fish.", "Red fish! Blue fish?"]);
        let bytes = s.to_bytes();
        let t = DocumentStore::from_bytes(&bytes).unwrap();
        assert_eq!(t.to_bytes(), bytes);
        assert_eq!(t.search("blue", 1)[0].text, "Blue fish?");
        assert!(DocumentStore::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(DocumentStore::from_bytes(&bad).is_err());
    }
}
