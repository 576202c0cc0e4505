//! Matrix ingestion: Matrix Market files, synthetic generators and corpus
//! manifests.

mod manifest;
mod mtx;
mod synthetic;

use thiserror::Error;

pub use manifest::{load_corpus, load_source, parse_manifest, CorpusEntry, MatrixSource, Origin, DEFAULT_MIN_ROWS};
pub use mtx::{read_csr, read_matrix_market, write_matrix_market, MtxField, MtxHeader, MtxSymmetry};
pub use synthetic::{generate_synthetic, mixed_corpus, powerlaw_degrees, SyntheticSpec};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported Matrix Market header: {0}")]
    UnsupportedHeader(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("duplicate matrix id '{0}' in manifest")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<IoError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
