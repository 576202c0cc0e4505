//! The four compressed storage layouts (CSR, COO, DIA, ELL) and the
//! conversions from canonical CSR.
//!
//! CSR is the canonical input form. DIA and ELL pad with explicit zeros, so
//! conversion to them is gated by a fill limit: the number of stored
//! diagonals (DIA) or the slab width (ELL) may not exceed
//! `fill_limit * aver_RD`.

mod coo;
mod csr;
mod dia;
mod ell;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coo::CooMatrix;
pub use csr::CsrMatrix;
pub use dia::DiaMatrix;
pub use ell::{EllMatrix, ELL_PADDING};

use crate::scalar::Scalar;

/// Default zero-fill limit for DIA and ELL conversion.
pub const DEFAULT_FILL_LIMIT: f64 = 20.0;

/// One of the four storage formats, in tuner priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "DIA")]
    Dia,
    #[serde(rename = "ELL")]
    Ell,
    #[serde(rename = "CSR")]
    Csr,
    #[serde(rename = "COO")]
    Coo,
}

impl Format {
    /// All formats in priority order DIA, ELL, CSR, COO.
    pub const ALL: [Format; 4] = [Format::Dia, Format::Ell, Format::Csr, Format::Coo];

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Dia => "DIA",
            Format::Ell => "ELL",
            Format::Csr => "CSR",
            Format::Coo => "COO",
        }
    }

    /// Position in the DIA > ELL > CSR > COO priority order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the format pads with zeros and is subject to the fill limit.
    pub fn needs_fill_check(self) -> bool {
        matches!(self, Format::Dia | Format::Ell)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DIA" => Ok(Format::Dia),
            "ELL" => Ok(Format::Ell),
            "CSR" => Ok(Format::Csr),
            "COO" => Ok(Format::Coo),
            _ => Err(FormatError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),
    #[error("entry {position} at ({row}, {col}) is outside a {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        position: usize,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("{format} is unsuitable: {required} stored lanes exceed the fill limit {limit}")]
    UnsuitableFormat {
        format: Format,
        required: usize,
        limit: f64,
    },
    #[error("unknown storage format '{0}'")]
    UnknownFormat(String),
}

/// The fill rule shared by DIA and ELL: `lanes <= fill_limit * aver_rd`.
pub fn within_fill_limit(lanes: usize, nnz: usize, nrows: usize, fill_limit: f64) -> bool {
    let aver_rd = if nrows == 0 { 0.0 } else { nnz as f64 / nrows as f64 };
    // no lanes always fits, even with an infinite limit on an empty matrix
    lanes == 0 || lanes as f64 <= fill_limit * aver_rd
}

/// A matrix held in any of the four layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseMatrix<T> {
    Csr(CsrMatrix<T>),
    Coo(CooMatrix<T>),
    Dia(DiaMatrix<T>),
    Ell(EllMatrix<T>),
}

impl<T: Scalar> SparseMatrix<T> {
    /// Converts canonical CSR to `format`, enforcing the fill limit for DIA/ELL.
    pub fn convert(csr: &CsrMatrix<T>, format: Format, fill_limit: f64) -> Result<Self, FormatError> {
        Ok(match format {
            Format::Csr => SparseMatrix::Csr(csr.clone()),
            Format::Coo => SparseMatrix::Coo(csr.to_coo()),
            Format::Dia => SparseMatrix::Dia(csr.to_dia(fill_limit)?),
            Format::Ell => SparseMatrix::Ell(csr.to_ell(fill_limit)?),
        })
    }

    pub fn format(&self) -> Format {
        match self {
            SparseMatrix::Csr(_) => Format::Csr,
            SparseMatrix::Coo(_) => Format::Coo,
            SparseMatrix::Dia(_) => Format::Dia,
            SparseMatrix::Ell(_) => Format::Ell,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            SparseMatrix::Csr(a) => (a.nrows(), a.ncols()),
            SparseMatrix::Coo(a) => (a.nrows(), a.ncols()),
            SparseMatrix::Dia(a) => (a.nrows(), a.ncols()),
            SparseMatrix::Ell(a) => (a.nrows(), a.ncols()),
        }
    }

    /// Row-major dense expansion.
    pub fn to_dense(&self) -> Vec<T> {
        match self {
            SparseMatrix::Csr(a) => a.to_dense(),
            SparseMatrix::Coo(a) => a.to_dense(),
            SparseMatrix::Dia(a) => a.to_dense(),
            SparseMatrix::Ell(a) => a.to_dense(),
        }
    }
}
