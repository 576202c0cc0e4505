use std::ops::Range;

use super::{check_x, coo_entries, csr_rows, dia_rows, ell_rows, partition_rows_by_nnz, KernelError, RowPartition};
use crate::formats::SparseMatrix;
use crate::scalar::Scalar;

/// Per-row work estimate used to balance threads for a given layout.
fn row_weights<T: Scalar>(a: &SparseMatrix<T>) -> Vec<usize> {
    let mut ptr = Vec::new();
    ptr.push(0);
    let mut push = |w: usize| ptr.push(ptr.last().copied().unwrap_or(0) + w);
    match a {
        SparseMatrix::Csr(m) => return m.row_ptr().to_vec(),
        SparseMatrix::Coo(m) => {
            let mut counts = vec![0usize; m.nrows()];
            m.row_idx().iter().for_each(|&r| counts[r] += 1);
            counts.into_iter().for_each(&mut push);
        }
        SparseMatrix::Dia(m) => (0..m.nrows()).for_each(|r| push(m.row_slots(r))),
        SparseMatrix::Ell(m) => (0..m.nrows()).for_each(|r| push(m.row_len(r))),
    }
    ptr
}

/// Parallel SpMV over `nthreads` nnz-balanced row segments.
///
/// Bit-identical to [`super::spmv`] on the same matrix for any thread count.
pub fn spmv_parallel<T: Scalar>(
    a: &SparseMatrix<T>,
    x: &[T],
    nthreads: usize,
) -> Result<Vec<T>, KernelError> {
    if nthreads <= 1 {
        return super::spmv(a, x);
    }
    spmv_parallel_with(a, x, &balanced_partition(a, nthreads))
}

/// The nnz-balanced row partition the parallel driver uses for `a`.
pub fn balanced_partition<T: Scalar>(a: &SparseMatrix<T>, nthreads: usize) -> RowPartition {
    partition_rows_by_nnz(&row_weights(a), nthreads.max(1))
}

/// Parallel SpMV over a caller-supplied row partition.
pub fn spmv_parallel_with<T: Scalar>(
    a: &SparseMatrix<T>,
    x: &[T],
    partition: &RowPartition,
) -> Result<Vec<T>, KernelError> {
    let mut y = vec![T::zero(); a.shape().0];
    spmv_parallel_into(a, x, partition, &mut y)?;
    Ok(y)
}

/// [`spmv_parallel_with`] into a caller-owned `y`.
pub fn spmv_parallel_into<T: Scalar>(
    a: &SparseMatrix<T>,
    x: &[T],
    partition: &RowPartition,
    y: &mut [T],
) -> Result<(), KernelError> {
    let (nrows, ncols) = a.shape();
    check_x(ncols, x.len())?;
    assert_eq!(partition.nrows(), nrows, "partition does not cover the matrix");
    assert_eq!(y.len(), nrows, "y length must equal the row count");
    if matches!(a, SparseMatrix::Coo(_)) {
        y.iter_mut().for_each(|v| *v = T::zero());
    }
    let coo_split = match a {
        SparseMatrix::Coo(m) if !m.is_row_sorted() => {
            // entries cannot be split by row; fall back to one segment
            coo_entries(m, x, 0..m.nnz(), 0, y);
            return Ok(());
        }
        SparseMatrix::Coo(m) => Some(
            partition
                .boundaries()
                .iter()
                .map(|&b| m.row_idx().partition_point(|&r| r < b))
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let run = |seg: usize, rows: Range<usize>, out: &mut [T]| match a {
        SparseMatrix::Csr(m) => csr_rows(m, x, rows, out),
        SparseMatrix::Dia(m) => dia_rows(m, x, rows, out),
        SparseMatrix::Ell(m) => ell_rows(m, x, rows, out),
        SparseMatrix::Coo(m) => {
            let split = coo_split.as_ref().expect("computed for COO");
            coo_entries(m, x, split[seg]..split[seg + 1], rows.start, out)
        }
    };
    spmv_segments(partition, y, run);
    Ok(())
}

/// Forks one scoped worker per non-empty segment, each owning its slice of `y`.
pub fn spmv_segments<T, F>(partition: &RowPartition, y: &mut [T], run: F)
where
    T: Send,
    F: Fn(usize, Range<usize>, &mut [T]) + Sync,
{
    let mut chunks = Vec::with_capacity(partition.nsegments());
    let mut rest = y;
    for (seg, rows) in partition.segments().enumerate() {
        let (head, tail) = rest.split_at_mut(rows.len());
        rest = tail;
        if !rows.is_empty() {
            chunks.push((seg, rows, head));
        }
    }
    if chunks.len() <= 1 {
        for (seg, rows, out) in chunks {
            run(seg, rows, out);
        }
        return;
    }
    let run = &run;
    std::thread::scope(|scope| {
        for (seg, rows, out) in chunks {
            scope.spawn(move || run(seg, rows, out));
        }
    });
}
