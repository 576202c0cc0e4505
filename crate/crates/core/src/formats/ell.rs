use crate::scalar::Scalar;

/// Column index carried by ELL padding slots.
pub const ELL_PADDING: usize = usize::MAX;

/// ELLPACK storage: a slab of `nrows x width` slots.
///
/// Slot `k` of row `i` lives at `k * nrows + i`, so each slab column is
/// contiguous. Real entries of a row precede its padding; padding slots
/// carry [`ELL_PADDING`] and a zero value.
#[derive(Debug, Clone, PartialEq)]
pub struct EllMatrix<T> {
    nrows: usize,
    ncols: usize,
    width: usize,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> EllMatrix<T> {
    pub(crate) fn from_parts(
        nrows: usize,
        ncols: usize,
        width: usize,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(col_idx.len(), nrows * width);
        debug_assert_eq!(values.len(), nrows * width);
        Self {
            nrows,
            ncols,
            width,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for k in 0..self.width {
            for row in 0..self.nrows {
                let col = self.col(row, k);
                if col != ELL_PADDING {
                    dense[row * self.ncols + col] = self.value(row, k);
                }
            }
        }
        dense
    }

    pub fn value(&self, row: usize, slot: usize) -> T {
        self.values[slot * self.nrows + row]
    }
}

impl<T> EllMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn col(&self, row: usize, slot: usize) -> usize {
        self.col_idx[slot * self.nrows + row]
    }

    /// Real (non-padding) entries stored for `row`.
    pub fn row_len(&self, row: usize) -> usize {
        (0..self.width)
            .take_while(|&k| self.col(row, k) != ELL_PADDING)
            .count()
    }
}
