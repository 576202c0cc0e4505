use std::ops::Range;

use super::{within_fill_limit, CooMatrix, DiaMatrix, EllMatrix, Format, FormatError, ELL_PADDING};
use crate::scalar::Scalar;

/// Compressed sparse row matrix in canonical form.
///
/// `row_ptr` has `nrows + 1` entries starting at 0; columns inside each row
/// are strictly increasing. Explicit zeros are kept as stored entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a CSR matrix from raw arrays, validating every invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, FormatError> {
        if row_ptr.len() != nrows + 1 {
            return Err(FormatError::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(FormatError::InvalidStructure("row_ptr[0] must be 0".into()));
        }
        if col_idx.len() != values.len() {
            return Err(FormatError::InvalidStructure(format!(
                "col_idx has {} entries but values has {}",
                col_idx.len(),
                values.len()
            )));
        }
        if row_ptr[nrows] != col_idx.len() {
            return Err(FormatError::InvalidStructure(format!(
                "row_ptr[{nrows}] = {} but there are {} entries",
                row_ptr[nrows],
                col_idx.len()
            )));
        }
        for row in 0..nrows {
            let (start, end) = (row_ptr[row], row_ptr[row + 1]);
            if start > end {
                return Err(FormatError::InvalidStructure(format!(
                    "row_ptr decreases at row {row}"
                )));
            }
            for k in start..end {
                let col = col_idx[k];
                if col >= ncols {
                    return Err(FormatError::IndexOutOfBounds {
                        position: k,
                        row,
                        col,
                        nrows,
                        ncols,
                    });
                }
                if k > start && col_idx[k - 1] >= col {
                    return Err(FormatError::InvalidStructure(format!(
                        "columns of row {row} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// An `nrows x ncols` matrix with no stored entries.
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds CSR from a row-major dense array, storing only nonzeros.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[T]) -> Self {
        assert_eq!(dense.len(), nrows * ncols, "dense buffer has the wrong size");
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in dense.chunks(ncols.max(1)).take(nrows) {
            for (col, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    col_idx.push(col);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        if ncols == 0 {
            row_ptr.resize(nrows + 1, 0);
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Canonicalizes a COO list: sorts by (row, col) and sums duplicates.
    pub fn from_coo(coo: &CooMatrix<T>) -> Result<Self, FormatError> {
        let (nrows, ncols) = (coo.nrows(), coo.ncols());
        for (position, (&row, &col)) in coo.row_idx().iter().zip(coo.col_idx()).enumerate() {
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

        // Counting sort by row keeps input order within a row, so duplicates
        // are summed in the order they were given.
        let mut row_ptr = vec![0usize; nrows + 1];
        for &row in coo.row_idx() {
            row_ptr[row + 1] += 1;
        }
        for row in 0..nrows {
            row_ptr[row + 1] += row_ptr[row];
        }
        let mut next = row_ptr.clone();
        let mut order = vec![0usize; coo.nnz()];
        for (k, &row) in coo.row_idx().iter().enumerate() {
            order[next[row]] = k;
            next[row] += 1;
        }

        let mut out_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(coo.nnz());
        let mut values = Vec::with_capacity(coo.nnz());
        out_ptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for row in 0..nrows {
            scratch.clear();
            scratch.extend(
                order[row_ptr[row]..row_ptr[row + 1]]
                    .iter()
                    .map(|&k| (coo.col_idx()[k], coo.values()[k])),
            );
            scratch.sort_by_key(|&(col, _)| col);
            for &(col, v) in &scratch {
                if col_idx.len() > out_ptr[row] && col_idx.last() == Some(&col) {
                    *values.last_mut().expect("non-empty row") += v;
                } else {
                    col_idx.push(col);
                    values.push(v);
                }
            }
            out_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr: out_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_coo(&self) -> CooMatrix<T> {
        let mut row_idx = Vec::with_capacity(self.nnz());
        for row in 0..self.nrows {
            row_idx.extend(std::iter::repeat_n(row, self.row_degree(row)));
        }
        CooMatrix::from_sorted_parts(
            self.nrows,
            self.ncols,
            row_idx,
            self.col_idx.clone(),
            self.values.clone(),
        )
    }

    /// Distinct diagonal offsets `col - row`, ascending.
    pub fn diagonal_offsets(&self) -> Vec<isize> {
        let mut seen = vec![false; self.nrows + self.ncols];
        let base = self.nrows as isize;
        for row in 0..self.nrows {
            for &col in self.row_cols(row) {
                seen[(col as isize - row as isize + base) as usize] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(slot, _)| slot as isize - base)
            .collect()
    }

    /// Converts to DIA; fails with `UnsuitableFormat` when the number of
    /// diagonals exceeds `fill_limit * aver_RD`.
    pub fn to_dia(&self, fill_limit: f64) -> Result<DiaMatrix<T>, FormatError> {
        let offsets = self.diagonal_offsets();
        if !within_fill_limit(offsets.len(), self.nnz(), self.nrows, fill_limit) {
            return Err(FormatError::UnsuitableFormat {
                format: Format::Dia,
                required: offsets.len(),
                limit: fill_limit * self.aver_rd(),
            });
        }
        let base = self.nrows as isize;
        let mut lane_of = vec![usize::MAX; self.nrows + self.ncols];
        for (lane, &off) in offsets.iter().enumerate() {
            lane_of[(off + base) as usize] = lane;
        }
        let m = self.nrows;
        let mut data = vec![T::zero(); offsets.len() * m];
        for row in 0..m {
            let (cols, vals) = self.row(row);
            for (&col, &v) in cols.iter().zip(vals) {
                let lane = lane_of[(col as isize - row as isize + base) as usize];
                data[lane * m + row] = v;
            }
        }
        Ok(DiaMatrix::from_parts(self.nrows, self.ncols, offsets, data))
    }

    /// Converts to ELL; fails with `UnsuitableFormat` when `max_RD` exceeds
    /// `fill_limit * aver_RD`.
    pub fn to_ell(&self, fill_limit: f64) -> Result<EllMatrix<T>, FormatError> {
        let width = self.max_row_degree();
        if !within_fill_limit(width, self.nnz(), self.nrows, fill_limit) {
            return Err(FormatError::UnsuitableFormat {
                format: Format::Ell,
                required: width,
                limit: fill_limit * self.aver_rd(),
            });
        }
        let m = self.nrows;
        let mut col_idx = vec![ELL_PADDING; width * m];
        let mut values = vec![T::zero(); width * m];
        for row in 0..m {
            let (cols, vals) = self.row(row);
            for (slot, (&col, &v)) in cols.iter().zip(vals).enumerate() {
                col_idx[slot * m + row] = col;
                values[slot * m + row] = v;
            }
        }
        Ok(EllMatrix::from_parts(self.nrows, self.ncols, width, col_idx, values))
    }

    /// Rows `rows` as a standalone CSR matrix with the same column count.
    pub fn row_slice(&self, rows: Range<usize>) -> Self {
        let start = self.row_ptr[rows.start];
        let end = self.row_ptr[rows.end];
        Self {
            nrows: rows.len(),
            ncols: self.ncols,
            row_ptr: self.row_ptr[rows.start..=rows.end].iter().map(|p| p - start).collect(),
            col_idx: self.col_idx[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for row in 0..self.nrows {
            let (cols, vals) = self.row(row);
            for (&col, &v) in cols.iter().zip(vals) {
                dense[row * self.ncols + col] = v;
            }
        }
        dense
    }

    /// Same sparsity pattern with every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * factor);
        out
    }

    pub fn aver_rd(&self) -> f64 {
        if self.nrows == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.nrows as f64
        }
    }

    pub fn max_row_degree(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

impl<T> CsrMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_degree(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    pub fn row_degrees(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.row_ptr.windows(2).map(|w| w[1] - w[0])
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn row(&self, row: usize) -> (&[usize], &[T]) {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coo(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> CooMatrix<f64> {
        CooMatrix::new(
            nrows,
            ncols,
            entries.iter().map(|e| e.0).collect(),
            entries.iter().map(|e| e.1).collect(),
            entries.iter().map(|e| e.2).collect(),
        )
        .unwrap()
    }

    fn tridiagonal(n: usize) -> CsrMatrix<f64> {
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                dense[i * n + j] = 1.0;
            }
        }
        CsrMatrix::from_dense(n, n, &dense)
    }

    #[test]
    fn from_coo_diagonal() {
        let a = CsrMatrix::from_coo(&coo(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)])).unwrap();
        assert_eq!(a.row_ptr(), &[0, 1, 2]);
        assert_eq!(a.col_idx(), &[0, 1]);
        assert_eq!(a.values(), &[1.0, 2.0]);
    }

    #[test]
    fn from_coo_sums_duplicates() {
        let a = CsrMatrix::from_coo(&coo(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)])).unwrap();
        assert_eq!(a.values(), &[3.0]);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn from_coo_matches_dense_accumulation() {
        let entries = [
            (4, 1, 0.5),
            (0, 3, -1.0),
            (2, 2, 2.0),
            (4, 1, 1.25),
            (1, 0, 3.0),
            (3, 4, -2.5),
            (0, 0, 1.0),
            (2, 2, -0.5),
            (4, 4, 7.0),
            (1, 3, 0.75),
            (3, 0, 9.0),
            (0, 3, 4.0),
        ];
        let mut dense = vec![0.0; 25];
        for &(i, j, v) in &entries {
            dense[i * 5 + j] += v;
        }
        let a = CsrMatrix::from_coo(&coo(5, 5, &entries)).unwrap();
        assert_eq!(a.to_dense(), dense);
    }

    #[test]
    fn from_coo_rejects_out_of_bounds() {
        let raw = CooMatrix::from_sorted_parts(2, 2, vec![0, 5], vec![0, 0], vec![1.0, 1.0]);
        match CsrMatrix::from_coo(&raw) {
            Err(FormatError::IndexOutOfBounds { position, row, .. }) => {
                assert_eq!((position, row), (1, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn new_validates() {
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 1], vec![1], vec![0.0]).is_ok());
    }

    #[test]
    fn to_coo_identity_and_empty() {
        let c = CsrMatrix::<f64>::identity(2).to_coo();
        assert_eq!(c.row_idx(), &[0, 1]);
        assert_eq!(c.col_idx(), &[0, 1]);
        assert_eq!(c.values(), &[1.0, 1.0]);
        let e = CsrMatrix::<f64>::empty(3, 3).to_coo();
        assert_eq!(e.nnz(), 0);
    }

    #[test]
    fn coo_round_trip_6x4() {
        let dense = [
            1.0, 0.0, 0.0, 2.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 3.0, 4.0, 0.0, //
            5.0, 0.0, 0.0, 0.0, //
            0.0, 6.0, 0.0, 7.0, //
            8.0, 9.0, 10.0, 11.0,
        ];
        let a = CsrMatrix::from_dense(6, 4, &dense);
        assert_eq!(CsrMatrix::from_coo(&a.to_coo()).unwrap(), a);
    }

    #[test]
    fn dia_tridiagonal_offsets() {
        let d = tridiagonal(5).to_dia(20.0).unwrap();
        assert_eq!(d.offsets(), &[-1, 0, 1]);
        assert_eq!(d.ndiags(), 3);
        // lanes are padded where the diagonal leaves the matrix
        assert_eq!(d.lane(0)[0], 0.0);
        assert_eq!(d.lane(2)[4], 0.0);
    }

    #[test]
    fn dia_identity_lane() {
        let d = CsrMatrix::<f64>::identity(4).to_dia(20.0).unwrap();
        assert_eq!(d.offsets(), &[0]);
        assert_eq!(d.lane(0), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn dia_rejects_scattered_offsets() {
        let n = 100;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + (7 * i) % n] = 1.0;
        }
        let a = CsrMatrix::from_dense(n, n, &dense);
        // enumerate distinct offsets independently
        let mut offs: Vec<isize> = (0..n).map(|i| ((7 * i) % n) as isize - i as isize).collect();
        offs.sort_unstable();
        offs.dedup();
        assert!(offs.len() > 20);
        match a.to_dia(20.0) {
            Err(FormatError::UnsuitableFormat { format, required, .. }) => {
                assert_eq!(format, Format::Dia);
                assert_eq!(required, offs.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn with_degrees(degrees: &[usize], ncols: usize) -> CsrMatrix<f64> {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for &d in degrees {
            col_idx.extend(0..d);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix::new(degrees.len(), ncols, row_ptr, col_idx, vec![1.0; nnz]).unwrap()
    }

    #[test]
    fn ell_identity() {
        let e = CsrMatrix::<f64>::identity(3).to_ell(20.0).unwrap();
        assert_eq!(e.width(), 1);
        for row in 0..3 {
            assert_eq!(e.col(row, 0), row);
        }
    }

    #[test]
    fn ell_fill_limit_boundaries() {
        // aver_RD = 53/4 = 13.25, 50 <= 265
        let e = with_degrees(&[1, 1, 1, 50], 50).to_ell(20.0).unwrap();
        assert_eq!(e.width(), 50);
        // aver_RD = 81/41, 20 * 1.9756 = 39.5 < 41
        let mut degrees = vec![1; 40];
        degrees.push(41);
        assert!(matches!(
            with_degrees(&degrees, 41).to_ell(20.0),
            Err(FormatError::UnsuitableFormat { format: Format::Ell, required: 41, .. })
        ));
    }

    #[test]
    fn empty_matrix_converts() {
        let a = CsrMatrix::<f64>::empty(3, 3);
        assert_eq!(a.to_dia(20.0).unwrap().ndiags(), 0);
        assert_eq!(a.to_ell(20.0).unwrap().width(), 0);
    }

    #[test]
    fn row_slice_keeps_rows() {
        let a = tridiagonal(5);
        let s = a.row_slice(1..3);
        assert_eq!(s.nrows(), 2);
        assert_eq!(s.to_dense(), a.to_dense()[5..15].to_vec());
    }
}
