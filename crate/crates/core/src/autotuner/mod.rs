//! Runtime stage: staged feature extraction interleaved with per-format rule
//! groups, a confidence threshold, and an execute-and-measure fallback.

mod measure;

use std::fmt;
use std::ops::Range;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use measure::{brute_force, execute_and_measure, time_format, time_kernel, BruteForce, FormatTiming, Measurement};

use crate::features::{ExtractionCounts, Feature, FeatureConfig, FeatureExtractor, FeatureVector};
use crate::formats::{within_fill_limit, CsrMatrix, Format, FormatError, SparseMatrix};
use crate::kernels::{
    balanced_partition, partition_rows_by_nnz, spmv_into, spmv_parallel_into, spmv_segments, KernelError,
    RowPartition,
};
use crate::mining::RuleSet;
use crate::scalar::Scalar;
use crate::timing::{random_vector, TimingConfig};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.8;

pub(crate) fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("speedup {speedup} <= 1: tuning can never pay off")]
    NonPositiveGain { speedup: f64 },
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// A confident rule-based choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub format: Format,
    pub confidence: f64,
}

fn ensure_feature<T: Scalar>(ex: &mut FeatureExtractor<'_, T>, feature: Feature) {
    match feature {
        Feature::Ndiags | Feature::NtdiagsRatio | Feature::ErDia => {
            ex.ensure_dia();
        }
        Feature::ErEll => {
            ex.ensure_ell();
        }
        Feature::R => {
            ex.ensure_powerlaw();
        }
        _ => {}
    }
}

fn group_confidence<'r>(rules: impl Iterator<Item = &'r crate::mining::Rule>, fv: &FeatureVector) -> Option<f64> {
    rules
        .filter(|r| r.matches(fv))
        .map(|r| r.confidence)
        .reduce(f64::max)
}

/// Staged prediction over an extractor, computing only what each group needs.
///
/// Groups run DIA, ELL, CSR, COO; DIA and ELL are skipped when their fill
/// rule fails and empty groups are skipped without extracting anything.
/// Returns the first group whose best matching confidence exceeds
/// `threshold`.
pub fn predict_staged<T: Scalar>(
    ex: &mut FeatureExtractor<'_, T>,
    rules: &RuleSet,
    threshold: f64,
) -> Option<Prediction> {
    for format in Format::ALL {
        if rules.group(format).next().is_none() {
            continue;
        }
        let suitable = match format {
            Format::Dia => ex.dia_suitable(),
            Format::Ell => ex.ell_suitable(),
            _ => true,
        };
        if !suitable {
            continue;
        }
        ex.ensure_stage(format);
        for rule in rules.group(format) {
            for c in &rule.conditions {
                ensure_feature(ex, c.feature);
            }
        }
        let fv = ex.basic();
        if let Some(confidence) = group_confidence(rules.group(format), fv) {
            if confidence > threshold {
                return Some(Prediction { format, confidence });
            }
        }
    }
    None
}

/// Staged prediction on a fresh extractor. `None` is a normal outcome
/// (no confident match).
pub fn predict_format<T: Scalar>(
    a: &CsrMatrix<T>,
    rules: &RuleSet,
    threshold: f64,
    features: FeatureConfig,
) -> Option<Prediction> {
    predict_staged(&mut FeatureExtractor::new(a, features), rules, threshold)
}

/// Reference predictor over a fully extracted feature vector.
pub fn predict_reference(fv: &FeatureVector, rules: &RuleSet, threshold: f64, fill_limit: f64) -> Option<Prediction> {
    for format in Format::ALL {
        let suitable = match format {
            Format::Dia => within_fill_limit(fv.ndiags.unwrap_or(0), fv.nnz, fv.m, fill_limit),
            Format::Ell => fv.ell_suitable(fill_limit),
            _ => true,
        };
        if !suitable {
            continue;
        }
        if let Some(confidence) = group_confidence(rules.group(format), fv) {
            if confidence > threshold {
                return Some(Prediction { format, confidence });
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub threshold: f64,
    /// Formats tried by execute-and-measure.
    pub fallback_candidates: Vec<Format>,
    /// Runs per fallback candidate.
    pub timing: TimingConfig,
    /// Runs for the CSR baseline the overhead is expressed in.
    pub baseline: TimingConfig,
    pub features: FeatureConfig,
    pub threads: usize,
    pub seed: u64,
    /// Tune each thread's row segment on its own.
    pub heterogeneous: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            fallback_candidates: Format::ALL.to_vec(),
            timing: TimingConfig::ONCE,
            baseline: TimingConfig { warmup: 1, repeats: 5 },
            features: FeatureConfig::default(),
            threads: 1,
            seed: 42,
            heterogeneous: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TunePath {
    Predicted,
    Measured,
}

impl fmt::Display for TunePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TunePath::Predicted => "predicted",
            TunePath::Measured => "measured",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    pub path: TunePath,
    pub format: Format,
    pub confidence: Option<f64>,
    /// Fallback timings; empty on the predicted path.
    pub timings: Vec<FormatTiming>,
    /// Stage invocations during prediction.
    #[serde(skip)]
    pub stages: ExtractionCounts,
    #[serde(serialize_with = "secs")]
    pub feature_time: Duration,
    #[serde(serialize_with = "secs")]
    pub conversion_time: Duration,
    #[serde(serialize_with = "secs")]
    pub measure_time: Duration,
    /// All tuning work: features, prediction, conversion and measurement.
    #[serde(serialize_with = "secs")]
    pub overhead: Duration,
    /// Baseline CSR SpMV time, measured separately.
    #[serde(serialize_with = "secs")]
    pub csr_time: Duration,
    /// `overhead / csr_time`.
    pub overhead_mult: f64,
    /// Per-segment formats in heterogeneous mode.
    pub segment_formats: Vec<Format>,
}

pub const REPORT_CSV_HEADER: &str =
    "id,path,format,confidence,t_dia,t_ell,t_csr,t_coo,feature_s,conversion_s,measure_s,overhead_s,csr_s,overhead_mult";

impl TuningReport {
    pub fn timing_of(&self, format: Format) -> Option<Duration> {
        self.timings.iter().find(|t| t.format == format).map(|t| t.time)
    }

    /// One row under [`REPORT_CSV_HEADER`].
    pub fn to_csv_row(&self, id: &str) -> String {
        let opt = |d: Option<Duration>| d.map(|d| d.as_secs_f64().to_string()).unwrap_or_default();
        let mut cells = vec![
            id.to_string(),
            self.path.to_string(),
            self.format.to_string(),
            self.confidence.map(|c| c.to_string()).unwrap_or_default(),
        ];
        cells.extend(Format::ALL.iter().map(|&f| opt(self.timing_of(f))));
        cells.extend(
            [self.feature_time, self.conversion_time, self.measure_time, self.overhead, self.csr_time]
                .iter()
                .map(|d| d.as_secs_f64().to_string()),
        );
        cells.push(self.overhead_mult.to_string());
        cells.join(",")
    }
}

#[derive(Debug, Clone)]
enum Layout<T> {
    Whole {
        matrix: SparseMatrix<T>,
        partition: Option<RowPartition>,
    },
    Segments {
        partition: RowPartition,
        parts: Vec<SparseMatrix<T>>,
    },
}

/// A matrix converted to its tuned format, ready for repeated SpMV.
///
/// Immutable; concurrent `spmv` calls are fine.
#[derive(Debug, Clone)]
pub struct TunedKernel<T> {
    layout: Layout<T>,
    nrows: usize,
    ncols: usize,
    pub report: TuningReport,
}

impl<T: Scalar> TunedKernel<T> {
    pub fn format(&self) -> Format {
        self.report.format
    }

    /// The converted matrix; `None` in heterogeneous mode.
    pub fn matrix(&self) -> Option<&SparseMatrix<T>> {
        match &self.layout {
            Layout::Whole { matrix, .. } => Some(matrix),
            Layout::Segments { .. } => None,
        }
    }

    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>, KernelError> {
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<(), KernelError> {
        if x.len() != self.ncols {
            return Err(KernelError::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        match &self.layout {
            Layout::Whole {
                matrix,
                partition: Some(p),
            } => spmv_parallel_into(matrix, x, p, y),
            Layout::Whole { matrix, partition: None } => spmv_into(matrix, x, y),
            Layout::Segments { partition, parts } => {
                spmv_segments(partition, y, |seg, _: Range<usize>, out: &mut [T]| {
                    spmv_into(&parts[seg], x, out).expect("dimensions checked");
                });
                Ok(())
            }
        }
    }
}

/// Picks a format for `a` and converts it.
///
/// Confident predictions skip measurement; otherwise the suitable fallback
/// candidates are each run and timed. The report's overhead covers every
/// step, and the CSR baseline is measured afterwards outside it.
pub fn tune<T: Scalar>(a: &CsrMatrix<T>, rules: &RuleSet, config: &TuneConfig) -> Result<TunedKernel<T>, TuneError> {
    if config.heterogeneous && config.threads > 1 {
        return tune_segments(a, rules, config);
    }
    let (matrix, mut report) = tune_whole(a, rules, config)?;
    let start = Instant::now();
    let partition = (config.threads > 1).then(|| balanced_partition(&matrix, config.threads));
    report.conversion_time += start.elapsed();
    report.overhead += start.elapsed();
    let x: Vec<T> = random_vector(a.ncols(), config.seed);
    finish_report(&mut report, a, &x, config);
    Ok(TunedKernel {
        layout: Layout::Whole { matrix, partition },
        nrows: a.nrows(),
        ncols: a.ncols(),
        report,
    })
}

fn tune_whole<T: Scalar>(
    a: &CsrMatrix<T>,
    rules: &RuleSet,
    config: &TuneConfig,
) -> Result<(SparseMatrix<T>, TuningReport), TuneError> {
    let start = Instant::now();
    let mut ex = FeatureExtractor::new(a, config.features);
    let prediction = predict_staged(&mut ex, rules, config.threshold);
    let feature_time = start.elapsed();
    let fill = config.features.fill_limit;

    let mut report = TuningReport {
        path: TunePath::Predicted,
        format: Format::Csr,
        confidence: None,
        timings: Vec::new(),
        stages: ex.counts(),
        feature_time,
        conversion_time: Duration::ZERO,
        measure_time: Duration::ZERO,
        overhead: Duration::ZERO,
        csr_time: Duration::ZERO,
        overhead_mult: 0.0,
        segment_formats: Vec::new(),
    };

    let matrix = if let Some(p) = prediction {
        let t = Instant::now();
        let m = SparseMatrix::convert(a, p.format, fill)?;
        report.conversion_time = t.elapsed();
        report.format = p.format;
        report.confidence = Some(p.confidence);
        m
    } else {
        let t = Instant::now();
        let candidates: Vec<Format> = config
            .fallback_candidates
            .iter()
            .copied()
            .filter(|f| match f {
                Format::Dia => ex.dia_suitable(),
                Format::Ell => ex.ell_suitable(),
                _ => true,
            })
            .collect();
        report.feature_time += t.elapsed();
        report.stages = ex.counts();
        let x: Vec<T> = random_vector(a.ncols(), config.seed);
        let m = execute_and_measure(a, &candidates, config.timing, config.threads, &x, fill);
        report.path = TunePath::Measured;
        report.format = m.format;
        report.conversion_time = m.timings.iter().map(|t| t.conversion).sum();
        report.measure_time = m.timings.iter().map(|t| t.total - t.conversion).sum();
        report.timings = m.timings;
        m.matrix
    };
    report.overhead = start.elapsed();
    Ok((matrix, report))
}

fn finish_report<T: Scalar>(report: &mut TuningReport, a: &CsrMatrix<T>, x: &[T], config: &TuneConfig) {
    let csr = SparseMatrix::Csr(a.clone());
    let partition = (config.threads > 1).then(|| balanced_partition(&csr, config.threads));
    report.csr_time = time_kernel(&csr, partition.as_ref(), x, config.baseline);
    let base = report.csr_time.as_secs_f64();
    report.overhead_mult = if base > 0.0 {
        report.overhead.as_secs_f64() / base
    } else {
        f64::INFINITY
    };
}

fn tune_segments<T: Scalar>(a: &CsrMatrix<T>, rules: &RuleSet, config: &TuneConfig) -> Result<TunedKernel<T>, TuneError> {
    let start = Instant::now();
    let partition = partition_rows_by_nnz(a.row_ptr(), config.threads);
    let serial = TuneConfig {
        threads: 1,
        heterogeneous: false,
        ..config.clone()
    };
    let mut parts = Vec::with_capacity(partition.nsegments());
    let mut reports = Vec::with_capacity(partition.nsegments());
    for rows in partition.segments() {
        let slice = a.row_slice(rows);
        let (m, r) = tune_whole(&slice, rules, &serial)?;
        parts.push(m);
        reports.push(r);
    }
    let overhead = start.elapsed();
    // report the format carrying the most nonzeros
    let nnz = partition.segment_nnz(a.row_ptr());
    let main = (0..reports.len()).max_by_key(|&i| nnz[i]).unwrap_or(0);
    let measured = reports.iter().any(|r| r.path == TunePath::Measured);
    let mut report = TuningReport {
        path: if measured { TunePath::Measured } else { TunePath::Predicted },
        format: reports.get(main).map_or(Format::Csr, |r| r.format),
        confidence: reports.get(main).and_then(|r| r.confidence),
        timings: reports.iter().flat_map(|r| r.timings.iter().copied()).collect(),
        stages: reports.get(main).map(|r| r.stages).unwrap_or_default(),
        feature_time: reports.iter().map(|r| r.feature_time).sum(),
        conversion_time: reports.iter().map(|r| r.conversion_time).sum(),
        measure_time: reports.iter().map(|r| r.measure_time).sum(),
        overhead,
        csr_time: Duration::ZERO,
        overhead_mult: 0.0,
        segment_formats: reports.iter().map(|r| r.format).collect(),
    };
    let x: Vec<T> = random_vector(a.ncols(), config.seed);
    finish_report(&mut report, a, &x, config);
    Ok(TunedKernel {
        layout: Layout::Segments { partition, parts },
        nrows: a.nrows(),
        ncols: a.ncols(),
        report,
    })
}

/// Smallest call count `n*` beyond which tuning pays off:
/// `overhead_mult / (1 - 1/speedup)`, evaluated as
/// `overhead_mult * speedup / (speedup - 1)` to avoid the rounding of `1/speedup`.
pub fn amortization_threshold(overhead_mult: f64, speedup: f64) -> Result<f64, TuneError> {
    // written so that NaN is rejected too
    if speedup.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(TuneError::NonPositiveGain { speedup });
    }
    Ok(overhead_mult * speedup / (speedup - 1.0))
}

/// The integer call count to report after `n > `: `ceil(n*)`.
pub fn amortization_calls(n_star: f64) -> u64 {
    n_star.ceil() as u64
}
