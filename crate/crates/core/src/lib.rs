pub mod error;
pub mod eval;
pub mod exec;
pub mod functions;
pub mod model;
pub mod retrieval;
pub mod sql;
pub mod types;
pub mod value;

pub use error::{Error, ErrorCategory, Result};
pub use value::{ResultSet, SqlValue};
