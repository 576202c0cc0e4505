use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::{generate_synthetic, read_csr, IoError, MtxField, MtxSymmetry, SyntheticSpec};
use crate::formats::CsrMatrix;
use crate::scalar::Scalar;

/// Matrices with fewer rows than this are flagged in a corpus.
pub const DEFAULT_MIN_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    File(PathBuf),
    Generator(SyntheticSpec),
}

/// One corpus member before loading.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSource {
    pub id: String,
    pub origin: Origin,
    pub symmetry: MtxSymmetry,
    pub field: MtxField,
}

/// A loaded corpus member.
#[derive(Debug, Clone)]
pub struct CorpusEntry<T> {
    pub source: MatrixSource,
    pub matrix: CsrMatrix<T>,
    /// Fewer rows than the corpus floor.
    pub below_floor: bool,
}

/// Parses a manifest: one Matrix Market path (relative to `base_dir`) or
/// `gen <spec>` per line, `#` starting a comment. Ids are file stems or the
/// spec text and must be unique.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<MatrixSource>, IoError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let source = if let Some(spec) = line.strip_prefix("gen ") {
            let spec: SyntheticSpec = spec.trim().parse().map_err(|e| IoError::Parse {
                line: i + 1,
                reason: format!("{e}"),
            })?;
            MatrixSource {
                id: spec.to_string(),
                origin: Origin::Generator(spec),
                symmetry: MtxSymmetry::General,
                field: MtxField::Real,
            }
        } else {
            let path = base_dir.join(line);
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| line.to_string());
            MatrixSource {
                id,
                origin: Origin::File(path),
                symmetry: MtxSymmetry::General,
                field: MtxField::Real,
            }
        };
        if !seen.insert(source.id.clone()) {
            return Err(IoError::DuplicateId(source.id));
        }
        out.push(source);
    }
    Ok(out)
}

/// Loads one source; symmetry and field are filled in from the file header.
pub fn load_source<T: Scalar>(source: &MatrixSource) -> Result<(MatrixSource, CsrMatrix<T>), IoError> {
    match &source.origin {
        Origin::Generator(spec) => Ok((source.clone(), generate_synthetic(spec)?)),
        Origin::File(path) => {
            let wrap = |e: IoError| IoError::File {
                path: path.display().to_string(),
                source: Box::new(e),
            };
            let file = File::open(path).map_err(|e| wrap(e.into()))?;
            let (header, csr) = read_csr(BufReader::new(file)).map_err(wrap)?;
            let mut src = source.clone();
            src.symmetry = header.symmetry;
            src.field = header.field;
            Ok((src, csr))
        }
    }
}

/// Loads every source of a manifest file. Members that fail to load are
/// logged and skipped.
pub fn load_corpus<T: Scalar>(manifest: &Path, min_rows: usize) -> Result<Vec<CorpusEntry<T>>, IoError> {
    let text = std::fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let sources = parse_manifest(&text, base)?;
    let mut out = Vec::with_capacity(sources.len());
    for source in &sources {
        match load_source::<T>(source) {
            Ok((source, matrix)) => {
                let below_floor = matrix.nrows() < min_rows;
                if below_floor {
                    log::info!("{}: {} rows is below the corpus floor {min_rows}", source.id, matrix.nrows());
                }
                out.push(CorpusEntry {
                    source,
                    matrix,
                    below_floor,
                });
            }
            Err(e) => log::warn!("skipping {}: {e}", source.id),
        }
    }
    Ok(out)
}
