//! Sentence-level hybrid lexical and dense retrieval.

pub mod bm25;
pub mod embed;
pub mod fusion;
pub mod split;
mod store;

pub use bm25::Bm25Index;
pub use embed::{cosine, embedder_from_id, Embedder, HashedNgramEmbedder};
pub use fusion::{rank_by_score, reciprocal_rank_fusion, RRF_CONSTANT};
pub use split::split_sentences;
pub use store::{load_documents, Document, DocumentStore, SearchHit, Sentence, FORMAT_VERSION};
