use std::io::{BufRead, Write};

use super::IoError;
use crate::formats::{CooMatrix, CsrMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxField {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    Symmetric,
}

/// Parsed `%%MatrixMarket` banner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MtxHeader {
    pub field: MtxField,
    pub symmetry: MtxSymmetry,
}

fn parse_header(line: &str) -> Result<MtxHeader, IoError> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(IoError::Parse {
            line: 1,
            reason: "missing %%MatrixMarket banner".into(),
        });
    }
    if tokens.len() != 5 {
        return Err(IoError::Parse {
            line: 1,
            reason: format!("banner has {} tokens, expected 5", tokens.len()),
        });
    }
    if tokens[1] != "matrix" {
        return Err(IoError::UnsupportedHeader(format!("object '{}'", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(IoError::UnsupportedHeader(format!("format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => MtxField::Real,
        "integer" => MtxField::Integer,
        "pattern" => MtxField::Pattern,
        other => return Err(IoError::UnsupportedHeader(format!("field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MtxSymmetry::General,
        "symmetric" => MtxSymmetry::Symmetric,
        other => return Err(IoError::UnsupportedHeader(format!("symmetry '{other}'"))),
    };
    Ok(MtxHeader { field, symmetry })
}

/// Reads a coordinate Matrix Market stream into a (non-canonical) COO list.
///
/// Indices become 0-based, symmetric files are expanded to both triangles
/// (diagonal entries once), pattern entries get value 1.
pub fn read_matrix_market<T: Scalar, R: BufRead>(reader: R) -> Result<(MtxHeader, CooMatrix<T>), IoError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = match lines.next() {
        Some((_, line)) => parse_header(&line?)?,
        None => {
            return Err(IoError::Parse {
                line: 1,
                reason: "empty input".into(),
            })
        }
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals: Vec<T> = Vec::new();
    let mut read = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let bad = |reason: String| IoError::Parse { line: lineno, reason };
        let mut tok = trimmed.split_whitespace();
        let mut next_index = |what: &str| -> Result<usize, IoError> {
            let t = tok.next().ok_or_else(|| bad(format!("missing {what}")))?;
            t.parse::<usize>().map_err(|_| bad(format!("bad {what} '{t}'")))
        };
        let Some((m, n, nnz)) = size else {
            let dims = (next_index("row count")?, next_index("column count")?, next_index("entry count")?);
            size = Some(dims);
            let cap = if header.symmetry == MtxSymmetry::Symmetric { 2 * dims.2 } else { dims.2 };
            rows.reserve(cap);
            cols.reserve(cap);
            vals.reserve(cap);
            continue;
        };
        if read == nnz {
            return Err(bad(format!("more than the declared {nnz} entries")));
        }
        let i = next_index("row index")?;
        let j = next_index("column index")?;
        if i == 0 || j == 0 || i > m || j > n {
            return Err(bad(format!("index ({i}, {j}) outside {m}x{n}")));
        }
        let v = match header.field {
            MtxField::Pattern => T::one(),
            MtxField::Real | MtxField::Integer => {
                let t = tok.next().ok_or_else(|| bad("missing value".into()))?;
                if header.field == MtxField::Integer {
                    let iv: i64 = t.parse().map_err(|_| bad(format!("bad integer '{t}'")))?;
                    T::from_f64_lossy(iv as f64)
                } else {
                    let fv: f64 = t.parse().map_err(|_| bad(format!("bad value '{t}'")))?;
                    T::from_f64_lossy(fv)
                }
            }
        };
        if tok.next().is_some() {
            return Err(bad("trailing tokens".into()));
        }
        rows.push(i - 1);
        cols.push(j - 1);
        vals.push(v);
        if header.symmetry == MtxSymmetry::Symmetric && i != j {
            rows.push(j - 1);
            cols.push(i - 1);
            vals.push(v);
        }
        read += 1;
    }
    let Some((m, n, nnz)) = size else {
        return Err(IoError::Parse {
            line: 0,
            reason: "missing size line".into(),
        });
    };
    if read != nnz {
        return Err(IoError::Parse {
            line: 0,
            reason: format!("declared {nnz} entries, found {read}"),
        });
    }
    let coo = CooMatrix::new(m, n, rows, cols, vals).map_err(|e| IoError::Parse {
        line: 0,
        reason: e.to_string(),
    })?;
    Ok((header, coo))
}

/// Reads Matrix Market text and canonicalizes it to CSR.
pub fn read_csr<T: Scalar, R: BufRead>(reader: R) -> Result<(MtxHeader, CsrMatrix<T>), IoError> {
    let (header, coo) = read_matrix_market(reader)?;
    let csr = CsrMatrix::from_coo(&coo).map_err(|e| IoError::Parse {
        line: 0,
        reason: e.to_string(),
    })?;
    Ok((header, csr))
}

/// Writes `a` as `real general` coordinate Matrix Market, 1-based.
pub fn write_matrix_market<T: Scalar, W: Write>(a: &CsrMatrix<T>, mut out: W) -> Result<(), IoError> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for row in 0..a.nrows() {
        let (cols, vals) = a.row(row);
        for (&c, v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {}", row + 1, c + 1, v)?;
        }
    }
    out.flush()?;
    Ok(())
}
