//! SpMV `y = A x` for each storage format.
//!
//! Every kernel has a row-range form writing into a caller-owned slice of
//! `y`. The serial kernels run the range form over all rows, and the
//! parallel driver runs it over disjoint row segments, so a row's summation
//! order never depends on the thread count.

mod parallel;
mod partition;

use std::ops::Range;

use thiserror::Error;

pub use parallel::{balanced_partition, spmv_parallel, spmv_parallel_into, spmv_parallel_with, spmv_segments};
pub use partition::{partition_rows_by_nnz, RowPartition};

use crate::formats::{CooMatrix, CsrMatrix, DiaMatrix, EllMatrix, SparseMatrix, ELL_PADDING};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("dimension mismatch: matrix has {expected} columns, x has length {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

fn check_x(ncols: usize, x_len: usize) -> Result<(), KernelError> {
    if ncols == x_len {
        Ok(())
    } else {
        Err(KernelError::DimensionMismatch {
            expected: ncols,
            found: x_len,
        })
    }
}

pub fn spmv_csr<T: Scalar>(a: &CsrMatrix<T>, x: &[T]) -> Result<Vec<T>, KernelError> {
    check_x(a.ncols(), x.len())?;
    let mut y = vec![T::zero(); a.nrows()];
    csr_rows(a, x, 0..a.nrows(), &mut y);
    Ok(y)
}

pub fn spmv_coo<T: Scalar>(a: &CooMatrix<T>, x: &[T]) -> Result<Vec<T>, KernelError> {
    check_x(a.ncols(), x.len())?;
    let mut y = vec![T::zero(); a.nrows()];
    coo_entries(a, x, 0..a.nnz(), 0, &mut y);
    Ok(y)
}

pub fn spmv_dia<T: Scalar>(a: &DiaMatrix<T>, x: &[T]) -> Result<Vec<T>, KernelError> {
    check_x(a.ncols(), x.len())?;
    let mut y = vec![T::zero(); a.nrows()];
    dia_rows(a, x, 0..a.nrows(), &mut y);
    Ok(y)
}

pub fn spmv_ell<T: Scalar>(a: &EllMatrix<T>, x: &[T]) -> Result<Vec<T>, KernelError> {
    check_x(a.ncols(), x.len())?;
    let mut y = vec![T::zero(); a.nrows()];
    ell_rows(a, x, 0..a.nrows(), &mut y);
    Ok(y)
}

/// Serial SpMV through whichever layout `a` holds.
pub fn spmv<T: Scalar>(a: &SparseMatrix<T>, x: &[T]) -> Result<Vec<T>, KernelError> {
    match a {
        SparseMatrix::Csr(m) => spmv_csr(m, x),
        SparseMatrix::Coo(m) => spmv_coo(m, x),
        SparseMatrix::Dia(m) => spmv_dia(m, x),
        SparseMatrix::Ell(m) => spmv_ell(m, x),
    }
}

/// Serial SpMV into a caller-owned `y` of length `nrows`.
pub fn spmv_into<T: Scalar>(a: &SparseMatrix<T>, x: &[T], y: &mut [T]) -> Result<(), KernelError> {
    let (nrows, ncols) = a.shape();
    check_x(ncols, x.len())?;
    assert_eq!(y.len(), nrows, "y length must equal the row count");
    match a {
        SparseMatrix::Csr(m) => csr_rows(m, x, 0..nrows, y),
        SparseMatrix::Dia(m) => dia_rows(m, x, 0..nrows, y),
        SparseMatrix::Ell(m) => ell_rows(m, x, 0..nrows, y),
        SparseMatrix::Coo(m) => {
            y.iter_mut().for_each(|v| *v = T::zero());
            coo_entries(m, x, 0..m.nnz(), 0, y)
        }
    }
    Ok(())
}

/// CSR over `rows`; `y[..]` corresponds to `rows`. Each `y` slot written once.
pub(crate) fn csr_rows<T: Scalar>(a: &CsrMatrix<T>, x: &[T], rows: Range<usize>, y: &mut [T]) {
    let row_ptr = a.row_ptr();
    let col_idx = a.col_idx();
    let values = a.values();
    for (yi, row) in y.iter_mut().zip(rows) {
        let mut sum = T::zero();
        for k in row_ptr[row]..row_ptr[row + 1] {
            sum += values[k] * x[col_idx[k]];
        }
        *yi = sum;
    }
}

/// COO over the entry range `entries`; `y[0]` corresponds to row `row_base`.
pub(crate) fn coo_entries<T: Scalar>(
    a: &CooMatrix<T>,
    x: &[T],
    entries: Range<usize>,
    row_base: usize,
    y: &mut [T],
) {
    let rows = &a.row_idx()[entries.clone()];
    let cols = &a.col_idx()[entries.clone()];
    let vals = &a.values()[entries];
    for ((&r, &c), &v) in rows.iter().zip(cols).zip(vals) {
        y[r - row_base] += v * x[c];
    }
}

/// DIA over `rows`: outer loop over diagonals, each lane clipped to the
/// rows where its column is in range.
pub(crate) fn dia_rows<T: Scalar>(a: &DiaMatrix<T>, x: &[T], rows: Range<usize>, y: &mut [T]) {
    y.iter_mut().for_each(|v| *v = T::zero());
    for (d, &off) in a.offsets().iter().enumerate() {
        let valid = a.lane_rows(off);
        let start = valid.start.max(rows.start);
        let end = valid.end.min(rows.end);
        if start >= end {
            continue;
        }
        let lane = &a.lane(d)[start..end];
        let xs = &x[(start as isize + off) as usize..(end as isize + off) as usize];
        let ys = &mut y[start - rows.start..end - rows.start];
        for ((yi, &v), &xv) in ys.iter_mut().zip(lane).zip(xs) {
            *yi += v * xv;
        }
    }
}

/// ELL over `rows`: outer loop over slab columns, padding skipped.
pub(crate) fn ell_rows<T: Scalar>(a: &EllMatrix<T>, x: &[T], rows: Range<usize>, y: &mut [T]) {
    y.iter_mut().for_each(|v| *v = T::zero());
    let m = a.nrows();
    for k in 0..a.width() {
        let base = k * m;
        let cols = &a.col_idx()[base + rows.start..base + rows.end];
        let vals = &a.values()[base + rows.start..base + rows.end];
        for ((yi, &c), &v) in y.iter_mut().zip(cols).zip(vals) {
            if c != ELL_PADDING {
                *yi += v * x[c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::Format;

    fn fixture_8x6() -> CsrMatrix<f64> {
        let mut dense = vec![0.0; 48];
        let entries = [
            (0, 0, 1.5),
            (0, 4, -2.0),
            (1, 1, 3.25),
            (2, 0, 0.5),
            (2, 3, 4.0),
            (2, 5, -1.0),
            (4, 2, 2.0),
            (5, 5, 6.0),
            (6, 1, -0.75),
            (6, 2, 1.0),
            (6, 3, 8.0),
            (7, 0, 0.125),
        ];
        for (i, j, v) in entries {
            dense[i * 6 + j] = v;
        }
        CsrMatrix::from_dense(8, 6, &dense)
    }

    fn dense_matvec(dense: &[f64], nrows: usize, ncols: usize, x: &[f64]) -> Vec<f64> {
        (0..nrows)
            .map(|i| (0..ncols).map(|j| dense[i * ncols + j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn identity_is_noop_for_all_formats() {
        let a = CsrMatrix::<f64>::identity(4);
        let x = [1.0, -2.0, 3.5, 0.25];
        for f in Format::ALL {
            let m = SparseMatrix::convert(&a, f, 20.0).unwrap();
            assert_eq!(spmv(&m, &x).unwrap(), x.to_vec(), "{f}");
        }
    }

    #[test]
    fn zero_row_gives_zero() {
        let a = fixture_8x6();
        let y = spmv_csr(&a, &[1.0; 6]).unwrap();
        assert_eq!(y[3], 0.0);
    }

    #[test]
    fn csr_matches_dense_oracle() {
        let a = fixture_8x6();
        let x: Vec<f64> = (0..6).map(|j| 0.3 * j as f64 - 0.7).collect();
        let expect = dense_matvec(&a.to_dense(), 8, 6, &x);
        let y = spmv_csr(&a, &x).unwrap();
        for (got, want) in y.iter().zip(&expect) {
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0));
        }
    }

    #[test]
    fn coo_single_entry() {
        let c = CooMatrix::new(4, 4, vec![2], vec![3], vec![5.0]).unwrap();
        let y = spmv_coo(&c, &[0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 10.0, 0.0]);
    }

    #[test]
    fn coo_equals_csr_exactly() {
        let a = fixture_8x6();
        let x: Vec<f64> = (0..6).map(|j| 1.0 / (j as f64 + 3.0)).collect();
        assert_eq!(spmv_coo(&a.to_coo(), &x).unwrap(), spmv_csr(&a, &x).unwrap());
    }

    #[test]
    fn dia_tridiagonal_row_sums() {
        let n = 5;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                dense[i * n + j] = 1.0;
            }
        }
        let a = CsrMatrix::from_dense(n, n, &dense).to_dia(20.0).unwrap();
        assert_eq!(spmv_dia(&a, &[1.0; 5]).unwrap(), vec![2.0, 3.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn dia_and_ell_match_csr_on_banded_rectangular() {
        let (m, n) = (9, 7);
        let mut dense = vec![0.0; m * n];
        for i in 0..m {
            for off in [-2isize, 0, 1, 3] {
                let j = i as isize + off;
                if (0..n as isize).contains(&j) {
                    dense[i * n + j as usize] = 1.0 + (i * 7 + j as usize) as f64 * 0.1;
                }
            }
        }
        let a = CsrMatrix::from_dense(m, n, &dense);
        let x: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
        let y = spmv_csr(&a, &x).unwrap();
        for other in [
            spmv_dia(&a.to_dia(20.0).unwrap(), &x).unwrap(),
            spmv_ell(&a.to_ell(20.0).unwrap(), &x).unwrap(),
        ] {
            for (p, q) in y.iter().zip(&other) {
                assert!((p - q).abs() <= 1e-13 * p.abs().max(1.0));
            }
        }
    }

    #[test]
    fn ell_width_zero() {
        let a = CsrMatrix::<f64>::empty(3, 2).to_ell(20.0).unwrap();
        assert_eq!(spmv_ell(&a, &[1.0, 1.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = CsrMatrix::<f64>::identity(3);
        assert_eq!(
            spmv_csr(&a, &[1.0, 2.0]),
            Err(KernelError::DimensionMismatch { expected: 3, found: 2 })
        );
        assert!(spmv_dia(&a.to_dia(20.0).unwrap(), &[1.0]).is_err());
        assert!(spmv_ell(&a.to_ell(20.0).unwrap(), &[1.0]).is_err());
        assert!(spmv_coo(&a.to_coo(), &[1.0]).is_err());
    }
}
