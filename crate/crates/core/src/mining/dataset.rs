use std::io::{Read, Write};

use super::MiningError;
use crate::autotuner::time_format;
use crate::features::{extract_all, FeatureConfig, FeatureVector, CSV_HEADER};
use crate::formats::{CsrMatrix, Format};
use crate::scalar::Scalar;
use crate::timing::{gflops, random_vector, TimingConfig};

/// Formats whose GFLOP/s are within this of the best are co-best.
pub const TIE_TOLERANCE_GFLOPS: f64 = 0.1;

const GFLOPS_COLUMNS: [&str; 4] = ["gflops_dia", "gflops_ell", "gflops_csr", "gflops_coo"];

/// One labeled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub best_format: Format,
    /// Measured GFLOP/s per format, indexed by [`Format::index`]; `None` when
    /// the format was unsuitable or not measured.
    pub gflops: [Option<f64>; 4],
}

impl TrainingSample {
    /// A sample with a known label and no measurements.
    pub fn labeled(features: FeatureVector, best_format: Format) -> Self {
        Self {
            features,
            best_format,
            gflops: [None; 4],
        }
    }

    /// Labels from measurements: the best format is the highest-priority
    /// member of the co-best set. `None` if nothing was measured.
    pub fn from_measurements(features: FeatureVector, gflops: [Option<f64>; 4]) -> Option<Self> {
        let best = co_best_of(&gflops).into_iter().next()?;
        Some(Self {
            features,
            best_format: best,
            gflops,
        })
    }

    /// Formats within [`TIE_TOLERANCE_GFLOPS`] of the best measurement, in
    /// priority order. Falls back to the label when nothing was measured.
    pub fn co_best(&self) -> Vec<Format> {
        let set = co_best_of(&self.gflops);
        if set.is_empty() {
            vec![self.best_format]
        } else {
            set
        }
    }

    pub fn max_gflops(&self) -> Option<f64> {
        self.gflops.iter().flatten().copied().reduce(f64::max)
    }

    /// Whether predicting `format` counts as correct (ties count either way).
    pub fn accepts(&self, format: Format) -> bool {
        self.co_best().contains(&format)
    }
}

fn co_best_of(gflops: &[Option<f64>; 4]) -> Vec<Format> {
    let Some(max) = gflops.iter().flatten().copied().reduce(f64::max) else {
        return Vec::new();
    };
    Format::ALL
        .into_iter()
        .filter(|f| gflops[f.index()].is_some_and(|g| g >= max - TIE_TOLERANCE_GFLOPS))
        .collect()
}

/// The attribute-value table the tree learner consumes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
}

impl Dataset {
    pub fn new(samples: Vec<TrainingSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-format label counts, indexed by [`Format::index`].
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for s in &self.samples {
            counts[s.best_format.index()] += 1;
        }
        counts
    }

    /// Most frequent label; ties go to the higher-priority format.
    pub fn majority(&self) -> Format {
        let counts = self.class_counts();
        Format::ALL
            .into_iter()
            .max_by(|a, b| counts[a.index()].cmp(&counts[b.index()]).then(b.index().cmp(&a.index())))
            .expect("four formats")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = CSV_HEADER.iter().chain(&GFLOPS_COLUMNS).copied().collect();
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = s.features.csv_fields();
            row.push(s.best_format.to_string());
            row.extend(s.gflops.iter().map(|g| g.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Dataset::write_csv`]. GFLOP/s columns are
    /// optional.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, MiningError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = r
            .headers()
            .map_err(|e| MiningError::Parse {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let position = |name: &str| header.iter().position(|h| h == name);
        let columns: Vec<usize> = CSV_HEADER
            .iter()
            .map(|name| {
                position(name).ok_or_else(|| MiningError::Parse {
                    line: 1,
                    reason: format!("missing column '{name}'"),
                })
            })
            .collect::<Result<_, _>>()?;
        let gflops_cols: Vec<Option<usize>> = GFLOPS_COLUMNS.iter().map(|n| position(n)).collect();

        let mut samples = Vec::new();
        for (i, record) in r.records().enumerate() {
            let line = i + 2;
            let bad = |reason: String| MiningError::Parse { line, reason };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let fields: Vec<&str> = columns.iter().map(|&c| record.get(c).unwrap_or("")).collect();
            let features = FeatureVector::from_csv_fields(&fields).map_err(bad)?;
            let label: Format = fields[12].parse().map_err(|e: crate::formats::FormatError| bad(e.to_string()))?;
            let mut gflops = [None; 4];
            for (slot, col) in gflops.iter_mut().zip(&gflops_cols) {
                if let Some(text) = col.and_then(|c| record.get(c)).filter(|t| !t.is_empty()) {
                    *slot = Some(text.parse().map_err(|_| bad(format!("bad GFLOP/s '{text}'")))?);
                }
            }
            samples.push(TrainingSample {
                features,
                best_format: label,
                gflops,
            });
        }
        Ok(Self { samples })
    }
}

/// Measurement settings for labeling a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    pub timing: TimingConfig,
    pub features: FeatureConfig,
    pub threads: usize,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            timing: TimingConfig::LABELING,
            features: FeatureConfig::default(),
            threads: 1,
            seed: 42,
        }
    }
}

/// Extracts features and times every suitable format for each matrix.
///
/// Matrices that cannot be measured are logged and skipped. The returned ids
/// line up with the dataset's samples.
pub fn label_corpus<'a, T, I>(matrices: I, config: &LabelConfig) -> (Dataset, Vec<String>)
where
    T: Scalar,
    I: IntoIterator<Item = (&'a str, &'a CsrMatrix<T>)>,
{
    let mut samples = Vec::new();
    let mut ids = Vec::new();
    for (id, a) in matrices {
        let features = extract_all(a, config.features);
        let x: Vec<T> = random_vector(a.ncols(), config.seed);
        let mut gflops = [None; 4];
        for format in Format::ALL {
            match time_format(a, format, config.timing, config.threads, &x, config.features.fill_limit) {
                Ok((timing, _)) => gflops[format.index()] = Some(self::gflops(a.nnz(), timing.time)),
                Err(e) => log::debug!("{id}: {format} not measured: {e}"),
            }
        }
        match TrainingSample::from_measurements(features, gflops) {
            Some(sample) => {
                samples.push(sample);
                ids.push(id.to_string());
            }
            None => log::warn!("{id}: no format could be measured, skipped"),
        }
    }
    (Dataset::new(samples), ids)
}
