use std::path::{Path, PathBuf};
use std::sync::Arc;

use blendkit::retrieval::{load_documents, Document, DocumentStore, HashedNgramEmbedder, FORMAT_VERSION};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const CACHE_DIR_ENV: &str = "BLENDKIT_CACHE_DIR";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn build_store(docs: &[Document]) -> DocumentStore {
    DocumentStore::build(docs, Arc::new(HashedNgramEmbedder::default()))
}

fn cache_key(docs: &[Document]) -> String {
    let mut h = Sha256::new();
    h.update(FORMAT_VERSION.to_le_bytes());
    for d in docs {
        for part in [d.id.as_bytes(), d.text.as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
    }
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

fn is_document_source(path: &Path) -> bool {
    path.is_dir() || path.extension().is_some_and(|e| e == "jsonl")
}

/// Loads a built store file, or builds one from documents. Builds are cached
/// under `cache` keyed by content when a cache directory is configured.
pub fn open_store(path: &Path, cache: Option<&Path>) -> Result<DocumentStore, CliError> {
    let ctx = format!("store {}", path.display());
    if !is_document_source(path) {
        return DocumentStore::load(path).map_err(CliError::setup(ctx));
    }
    let docs = load_documents(path).map_err(CliError::setup(ctx.clone()))?;
    let Some(dir) = cache else {
        return Ok(build_store(&docs));
    };
    let cached = dir.join(format!("store-{}.bks", cache_key(&docs)));
    if let Ok(store) = DocumentStore::load(&cached) {
        return Ok(store);
    }
    let store = build_store(&docs);
    std::fs::create_dir_all(dir)?;
    store.save(&cached).map_err(CliError::setup(ctx))?;
    Ok(store)
}
