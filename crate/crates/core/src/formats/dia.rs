use std::ops::Range;

use crate::scalar::Scalar;

/// Diagonal storage.
///
/// `data` holds one lane of `nrows` values per stored diagonal, lanes laid
/// out contiguously. Lane `d` slot `i` is the entry at `(i, i + offsets[d])`;
/// slots whose column falls outside `[0, ncols)` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiaMatrix<T> {
    nrows: usize,
    ncols: usize,
    offsets: Vec<isize>,
    data: Vec<T>,
}

impl<T: Scalar> DiaMatrix<T> {
    pub(crate) fn from_parts(nrows: usize, ncols: usize, offsets: Vec<isize>, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), offsets.len() * nrows);
        Self {
            nrows,
            ncols,
            offsets,
            data,
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for (d, &off) in self.offsets.iter().enumerate() {
            let lane = self.lane(d);
            for row in self.lane_rows(off) {
                let col = (row as isize + off) as usize;
                dense[row * self.ncols + col] = lane[row];
            }
        }
        dense
    }
}

impl<T> DiaMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn ndiags(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn lane(&self, d: usize) -> &[T] {
        &self.data[d * self.nrows..(d + 1) * self.nrows]
    }

    /// Rows whose column `row + offset` lies inside the matrix.
    pub fn lane_rows(&self, offset: isize) -> Range<usize> {
        let start = (-offset).max(0) as usize;
        let end = (self.ncols as isize - offset).clamp(0, self.nrows as isize) as usize;
        start.min(end)..end
    }

    /// Number of stored slots (padding included) in `row`.
    pub fn row_slots(&self, row: usize) -> usize {
        self.offsets
            .iter()
            .filter(|&&off| self.lane_rows(off).contains(&row))
            .count()
    }
}
