use std::time::{Duration, Instant};

use serde::Serialize;

use super::secs;
use crate::formats::{CsrMatrix, Format, FormatError, SparseMatrix};
use crate::kernels::{balanced_partition, spmv_into, spmv_parallel_into, RowPartition};
use crate::scalar::Scalar;
use crate::timing::{measure, TimingConfig};

/// Timing of one format on one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormatTiming {
    pub format: Format,
    /// Median kernel time.
    #[serde(serialize_with = "secs")]
    pub time: Duration,
    /// CSR-to-format conversion plus partitioning.
    #[serde(serialize_with = "secs")]
    pub conversion: Duration,
    /// Conversion plus every kernel run, warmup included.
    #[serde(serialize_with = "secs")]
    pub total: Duration,
}

/// Converts `a` to `format` and times its kernel.
pub fn time_format<T: Scalar>(
    a: &CsrMatrix<T>,
    format: Format,
    timing: TimingConfig,
    threads: usize,
    x: &[T],
    fill_limit: f64,
) -> Result<(FormatTiming, SparseMatrix<T>), FormatError> {
    let start = Instant::now();
    let matrix = SparseMatrix::convert(a, format, fill_limit)?;
    let partition = (threads > 1).then(|| balanced_partition(&matrix, threads));
    let conversion = start.elapsed();
    let time = time_kernel(&matrix, partition.as_ref(), x, timing);
    Ok((
        FormatTiming {
            format,
            time,
            conversion,
            total: start.elapsed(),
        },
        matrix,
    ))
}

/// Median time of SpMV through `matrix` (parallel when `partition` is given).
pub fn time_kernel<T: Scalar>(
    matrix: &SparseMatrix<T>,
    partition: Option<&RowPartition>,
    x: &[T],
    timing: TimingConfig,
) -> Duration {
    let mut y = vec![T::zero(); matrix.shape().0];
    let (median, _) = measure(timing, || {
        let r = match partition {
            Some(p) => spmv_parallel_into(matrix, x, p, &mut y),
            None => spmv_into(matrix, x, &mut y),
        };
        r.expect("x length checked by caller");
        std::hint::black_box(&y);
    });
    median
}

/// Fastest timing; exact ties go to CSR when it is tied, else by priority.
pub(crate) fn fastest(timings: &[FormatTiming]) -> Option<Format> {
    let min = timings.iter().map(|t| t.time).min()?;
    let mut tied: Vec<Format> = timings.iter().filter(|t| t.time == min).map(|t| t.format).collect();
    if tied.contains(&Format::Csr) {
        return Some(Format::Csr);
    }
    tied.sort_by_key(|f| f.index());
    tied.first().copied()
}

/// Result of the execute-and-measure fallback.
#[derive(Debug, Clone)]
pub struct Measurement<T> {
    pub format: Format,
    pub timings: Vec<FormatTiming>,
    /// Candidates dropped because conversion was refused.
    pub dropped: Vec<Format>,
    pub matrix: SparseMatrix<T>,
}

/// Converts and runs each candidate, keeping the fastest.
///
/// Candidates whose conversion fails the fill limit are dropped; if none
/// remain, CSR is measured and chosen.
pub fn execute_and_measure<T: Scalar>(
    a: &CsrMatrix<T>,
    candidates: &[Format],
    timing: TimingConfig,
    threads: usize,
    x: &[T],
    fill_limit: f64,
) -> Measurement<T> {
    let mut timings = Vec::with_capacity(candidates.len());
    let mut matrices = Vec::with_capacity(candidates.len());
    let mut dropped = Vec::new();
    for &format in candidates {
        if timings.iter().any(|t: &FormatTiming| t.format == format) {
            continue;
        }
        match time_format(a, format, timing, threads, x, fill_limit) {
            Ok((t, m)) => {
                timings.push(t);
                matrices.push(m);
            }
            Err(e) => {
                log::debug!("dropping {format}: {e}");
                dropped.push(format);
            }
        }
    }
    if timings.is_empty() {
        let (t, m) = time_format(a, Format::Csr, timing, threads, x, fill_limit).expect("CSR always converts");
        timings.push(t);
        matrices.push(m);
    }
    let format = fastest(&timings).expect("non-empty");
    let pos = timings.iter().position(|t| t.format == format).expect("chosen from timings");
    let matrix = matrices.swap_remove(pos);
    Measurement {
        format,
        timings,
        dropped,
        matrix,
    }
}

/// Exhaustive search: every suitable format, converted and timed.
#[derive(Debug, Clone, Serialize)]
pub struct BruteForce {
    pub best: Format,
    pub timings: Vec<FormatTiming>,
    /// Wall time of the whole search.
    #[serde(serialize_with = "secs")]
    pub overhead: Duration,
}

impl BruteForce {
    pub fn time_of(&self, format: Format) -> Option<Duration> {
        self.timings.iter().find(|t| t.format == format).map(|t| t.time)
    }
}

pub fn brute_force<T: Scalar>(
    a: &CsrMatrix<T>,
    timing: TimingConfig,
    threads: usize,
    x: &[T],
    fill_limit: f64,
) -> BruteForce {
    let start = Instant::now();
    let m = execute_and_measure(a, &Format::ALL, timing, threads, x, fill_limit);
    BruteForce {
        best: m.format,
        timings: m.timings,
        overhead: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::random_vector;

    fn t(format: Format, nanos: u64) -> FormatTiming {
        let d = Duration::from_nanos(nanos);
        FormatTiming {
            format,
            time: d,
            conversion: Duration::ZERO,
            total: d,
        }
    }

    #[test]
    fn tie_breaks() {
        assert_eq!(fastest(&[t(Format::Coo, 5), t(Format::Dia, 5)]), Some(Format::Dia));
        assert_eq!(fastest(&[t(Format::Dia, 5), t(Format::Csr, 5)]), Some(Format::Csr));
        assert_eq!(fastest(&[t(Format::Dia, 6), t(Format::Ell, 5)]), Some(Format::Ell));
        assert_eq!(fastest(&[]), None);
    }

    #[test]
    fn single_candidate() {
        let a = CsrMatrix::<f64>::identity(50);
        let x = random_vector(50, 1);
        let m = execute_and_measure(&a, &[Format::Csr], TimingConfig::ONCE, 1, &x, 20.0);
        assert_eq!(m.format, Format::Csr);
        assert_eq!(m.timings.len(), 1);
    }

    #[test]
    fn unsuitable_candidates_fall_back_to_csr() {
        let n = 100;
        let mut dense = vec![0.0; n * n];
        dense[..n].iter_mut().for_each(|v| *v = 1.0);
        let a = CsrMatrix::from_dense(n, n, &dense);
        let x = random_vector(n, 1);
        let m = execute_and_measure(&a, &[Format::Dia, Format::Ell], TimingConfig::ONCE, 1, &x, 20.0);
        assert_eq!(m.format, Format::Csr);
        assert_eq!(m.dropped, vec![Format::Dia, Format::Ell]);
        assert_eq!(m.matrix.format(), Format::Csr);
    }

    #[test]
    fn chosen_is_argmin_of_recorded() {
        let a = CsrMatrix::<f64>::from_dense(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 5.0, 0.0, 6.0]);
        let x = random_vector(3, 9);
        for threads in [1, 2] {
            let m = execute_and_measure(&a, &Format::ALL, TimingConfig::ONCE, threads, &x, 20.0);
            assert_eq!(Some(m.format), fastest(&m.timings));
            assert_eq!(m.matrix.format(), m.format);
        }
        let bf = brute_force(&a, TimingConfig { warmup: 1, repeats: 3 }, 1, &x, 20.0);
        assert_eq!(bf.timings.len(), 4);
        assert_eq!(Some(bf.best), fastest(&bf.timings));
        assert!(bf.time_of(bf.best).is_some());
    }
}
