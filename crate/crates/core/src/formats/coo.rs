use super::FormatError;
use crate::scalar::Scalar;

/// Coordinate-list matrix.
///
/// COO produced from CSR is sorted by `(row, col)` without duplicates. COO
/// built with [`CooMatrix::new`] (e.g. from a Matrix Market file) only has
/// its indices bounds-checked; [`super::CsrMatrix::from_coo`] canonicalizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_idx: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CooMatrix<T> {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_idx: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, FormatError> {
        if row_idx.len() != col_idx.len() || col_idx.len() != values.len() {
            return Err(FormatError::InvalidStructure(format!(
                "entry arrays differ in length ({}, {}, {})",
                row_idx.len(),
                col_idx.len(),
                values.len()
            )));
        }
        for (position, (&row, &col)) in row_idx.iter().zip(&col_idx).enumerate() {
            if row >= nrows || col >= ncols {
                return Err(FormatError::IndexOutOfBounds {
                    position,
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
        }
        Ok(Self::from_sorted_parts(nrows, ncols, row_idx, col_idx, values))
    }

    pub(crate) fn from_sorted_parts(
        nrows: usize,
        ncols: usize,
        row_idx: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        Self {
            nrows,
            ncols,
            row_idx,
            col_idx,
            values,
        }
    }

    /// Dense expansion; duplicate entries are summed.
    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for ((&r, &c), &v) in self.row_idx.iter().zip(&self.col_idx).zip(&self.values) {
            dense[r * self.ncols + c] += v;
        }
        dense
    }

    /// Entries as `(row, col, value)` triples in storage order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.row_idx
            .iter()
            .zip(&self.col_idx)
            .zip(&self.values)
            .map(|((&r, &c), &v)| (r, c, v))
    }
}

impl<T> CooMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// True when entries are non-decreasing by row.
    pub fn is_row_sorted(&self) -> bool {
        self.row_idx.windows(2).all(|w| w[0] <= w[1])
    }

    /// True when entries are strictly increasing in `(row, col)`.
    pub fn is_canonical(&self) -> bool {
        self.row_idx
            .iter()
            .zip(&self.col_idx)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[0] < w[1])
    }
}
