use std::ops::Range;

/// Contiguous row segments, one per thread.
///
/// `boundaries` has `T + 1` entries, starts at 0, ends at `M` and is
/// non-decreasing. Segments may be empty when there are more threads than
/// rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPartition {
    boundaries: Vec<usize>,
}

impl RowPartition {
    /// A single segment covering `nrows` rows.
    pub fn whole(nrows: usize) -> Self {
        Self {
            boundaries: vec![0, nrows],
        }
    }

    pub fn from_boundaries(boundaries: Vec<usize>) -> Option<Self> {
        let ok = boundaries.len() >= 2
            && boundaries[0] == 0
            && boundaries.windows(2).all(|w| w[0] <= w[1]);
        ok.then_some(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn nsegments(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn nrows(&self) -> usize {
        *self.boundaries.last().expect("at least two boundaries")
    }

    pub fn segments(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.boundaries.windows(2).map(|w| w[0]..w[1])
    }

    /// Nonzeros in each segment under `row_ptr`.
    pub fn segment_nnz(&self, row_ptr: &[usize]) -> Vec<usize> {
        self.segments().map(|r| row_ptr[r.end] - row_ptr[r.start]).collect()
    }

    /// `max - min` of the per-segment nonzero counts.
    pub fn imbalance(&self, row_ptr: &[usize]) -> usize {
        let counts = self.segment_nnz(row_ptr);
        let max = counts.iter().copied().max().unwrap_or(0);
        let min = counts.iter().copied().min().unwrap_or(0);
        max - min
    }
}

/// Splits rows into `nthreads` contiguous segments of nearly equal nonzeros.
///
/// Each boundary is first placed at the row boundary nearest to the
/// cumulative target `k * NNZ / T`. If the resulting spread between the
/// heaviest and lightest segment exceeds the largest row degree, the
/// boundaries are re-placed inside a feasible `[L, L + max_degree]` window
/// so the spread is bounded by one row.
pub fn partition_rows_by_nnz(row_ptr: &[usize], nthreads: usize) -> RowPartition {
    assert!(!row_ptr.is_empty(), "row_ptr must have nrows + 1 entries");
    let nthreads = nthreads.max(1);
    let nrows = row_ptr.len() - 1;
    let nnz = row_ptr[nrows];

    let mut boundaries = Vec::with_capacity(nthreads + 1);
    boundaries.push(0);
    for k in 1..nthreads {
        let target = k as f64 * nnz as f64 / nthreads as f64;
        let lo = *boundaries.last().expect("non-empty");
        // first boundary at or past the target, then compare with the one before it
        let mut r = lo + row_ptr[lo..].partition_point(|&p| (p as f64) < target);
        r = r.min(nrows);
        if r > lo && target - row_ptr[r - 1] as f64 <= row_ptr[r] as f64 - target {
            r -= 1;
        }
        boundaries.push(r);
    }
    boundaries.push(nrows);
    let greedy = RowPartition { boundaries };

    let max_degree = row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    if nthreads == 1 || greedy.imbalance(row_ptr) <= max_degree {
        return greedy;
    }
    window_partition(row_ptr, nthreads, max_degree).unwrap_or(greedy)
}

/// Finds boundaries with every segment's nnz in `[L, L + width]`, trying
/// `L` from the average downwards.
fn window_partition(row_ptr: &[usize], nthreads: usize, width: usize) -> Option<RowPartition> {
    let nnz = *row_ptr.last()?;
    let avg = nnz / nthreads;
    let lowest = avg.saturating_sub(width);
    (lowest..=avg)
        .rev()
        .find_map(|low| window_feasible(row_ptr, nthreads, low, low + width))
}

fn window_feasible(row_ptr: &[usize], nthreads: usize, low: usize, high: usize) -> Option<RowPartition> {
    let nrows = row_ptr.len() - 1;
    // positions reachable after k segments form a contiguous interval
    let mut reach: Vec<(usize, usize)> = Vec::with_capacity(nthreads + 1);
    reach.push((0, 0));
    for _ in 0..nthreads {
        let (lo, hi) = *reach.last().expect("non-empty");
        let first = row_ptr.partition_point(|&p| p < row_ptr[lo] + low).max(lo);
        let last = row_ptr.partition_point(|&p| p <= row_ptr[hi] + high);
        if first > nrows || first >= last {
            return None;
        }
        reach.push((first, last - 1));
    }
    let (lo, hi) = reach[nthreads];
    if !(lo..=hi).contains(&nrows) {
        return None;
    }

    // walk back from the last row, picking predecessors nearest the targets
    let nnz = row_ptr[nrows];
    let mut boundaries = vec![nrows; nthreads + 1];
    for k in (1..nthreads).rev() {
        let next = boundaries[k + 1];
        let (lo, hi) = reach[k];
        let target = k as f64 * nnz as f64 / nthreads as f64;
        let pick = (lo..=hi.min(next))
            .filter(|&p| {
                let seg = row_ptr[next] - row_ptr[p];
                seg >= low && seg <= high
            })
            .min_by(|&a, &b| {
                let da = (row_ptr[a] as f64 - target).abs();
                let db = (row_ptr[b] as f64 - target).abs();
                da.total_cmp(&db)
            })?;
        boundaries[k] = pick;
    }
    boundaries[0] = 0;
    let seg0 = row_ptr[boundaries[1]];
    (seg0 >= low && seg0 <= high).then_some(RowPartition { boundaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ptr(degrees: &[usize]) -> Vec<usize> {
        let mut p = vec![0];
        for d in degrees {
            p.push(p.last().unwrap() + d);
        }
        p
    }

    #[test]
    fn exact_split() {
        let p = partition_rows_by_nnz(&ptr(&[4, 4, 4, 4]), 2);
        assert_eq!(p.boundaries(), &[0, 2, 4]);
    }

    #[test]
    fn nearest_boundary() {
        // targets 7: boundary after row 0 (10) is nearer than 0
        let p = partition_rows_by_nnz(&ptr(&[10, 1, 1, 1, 1]), 2);
        assert_eq!(p.boundaries(), &[0, 1, 5]);
        assert_eq!(p.segment_nnz(&ptr(&[10, 1, 1, 1, 1])), vec![10, 4]);
    }

    #[test]
    fn single_thread() {
        let p = partition_rows_by_nnz(&ptr(&[3, 0, 2]), 1);
        assert_eq!(p.boundaries(), &[0, 3]);
    }

    #[test]
    fn more_threads_than_rows() {
        let rp = ptr(&[2, 5]);
        let p = partition_rows_by_nnz(&rp, 5);
        assert_eq!(p.nsegments(), 5);
        assert_eq!(p.nrows(), 2);
        assert!(p.imbalance(&rp) <= 5);
    }

    #[test]
    fn repairs_greedy_spread() {
        // greedy nearest gives segments 8, 13, 9 (spread 5 > 4)
        let degrees = [4, 4, 4, 4, 1, 4, 4, 4, 1];
        let rp = ptr(&degrees);
        let p = partition_rows_by_nnz(&rp, 3);
        assert!(p.imbalance(&rp) <= 4, "{:?}", p.segment_nnz(&rp));
    }

    #[test]
    fn empty_matrix() {
        let p = partition_rows_by_nnz(&[0], 3);
        assert_eq!(p.boundaries(), &[0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn balance_within_one_row(degrees in prop::collection::vec(0usize..40, 0..120), t in 1usize..12) {
            let rp = ptr(&degrees);
            let p = partition_rows_by_nnz(&rp, t);
            let max_degree = degrees.iter().copied().max().unwrap_or(0);
            prop_assert_eq!(p.nsegments(), t);
            prop_assert_eq!(p.boundaries()[0], 0);
            prop_assert_eq!(p.nrows(), degrees.len());
            prop_assert!(p.boundaries().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(p.imbalance(&rp) <= max_degree);
            let avg = *rp.last().unwrap() as f64 / t as f64;
            for seg in p.segment_nnz(&rp) {
                prop_assert!((seg as f64 - avg).abs() <= max_degree as f64 + 1e-9);
            }
        }
    }
}
