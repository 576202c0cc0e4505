//! Structural feature parameters of a sparse matrix.
//!
//! Extraction is staged: basic row statistics, then the diagonal features,
//! then the ELL fill ratio, then the power-law factor. Each stage can run on
//! its own, which lets the tuner stop as soon as a rule group is confident.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::formats::{within_fill_limit, CsrMatrix, Format, DEFAULT_FILL_LIMIT};
use crate::scalar::Scalar;

/// Default occupancy above which a diagonal counts as "true".
pub const DEFAULT_TRUE_DIAG_THRESHOLD: f64 = 0.5;

/// CSV header of a feature row.
pub const CSV_HEADER: [&str; 13] = [
    "m",
    "n",
    "nnz",
    "aver_rd",
    "max_rd",
    "min_rd",
    "var_rd",
    "ndiags",
    "ntdiags_ratio",
    "er_dia",
    "er_ell",
    "r",
    "label",
];

/// Which optional stages have been computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub dia: bool,
    pub ell: bool,
    pub powerlaw: bool,
}

/// Feature parameters of one matrix. Optional fields are `None` when their
/// stage has not run or the value is undefined (e.g. no positive degrees).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub aver_rd: f64,
    pub max_rd: usize,
    pub min_rd: usize,
    pub var_rd: f64,
    pub ndiags: Option<usize>,
    pub ntdiags_ratio: Option<f64>,
    pub er_dia: Option<f64>,
    pub er_ell: Option<f64>,
    pub r: Option<f64>,
    #[serde(skip)]
    pub stages: Stages,
}

/// A named feature, usable in rule conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    M,
    Nnz,
    Ndiags,
    NtdiagsRatio,
    ErDia,
    MaxRd,
    MinRd,
    VarRd,
    ErEll,
    R,
    N,
    AverRd,
}

impl Feature {
    /// Candidate attributes for the tree learner, in tie-break order.
    pub const TRAINING: [Feature; 11] = [
        Feature::M,
        Feature::Nnz,
        Feature::Ndiags,
        Feature::NtdiagsRatio,
        Feature::ErDia,
        Feature::MaxRd,
        Feature::MinRd,
        Feature::VarRd,
        Feature::ErEll,
        Feature::R,
        Feature::N,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::M => "m",
            Feature::N => "n",
            Feature::Nnz => "nnz",
            Feature::AverRd => "aver_rd",
            Feature::MaxRd => "max_rd",
            Feature::MinRd => "min_rd",
            Feature::VarRd => "var_rd",
            Feature::Ndiags => "ndiags",
            Feature::NtdiagsRatio => "ntdiags_ratio",
            Feature::ErDia => "er_dia",
            Feature::ErEll => "er_ell",
            Feature::R => "r",
        }
    }

    pub fn value(self, fv: &FeatureVector) -> Option<f64> {
        match self {
            Feature::M => Some(fv.m as f64),
            Feature::N => Some(fv.n as f64),
            Feature::Nnz => Some(fv.nnz as f64),
            Feature::AverRd => Some(fv.aver_rd),
            Feature::MaxRd => Some(fv.max_rd as f64),
            Feature::MinRd => Some(fv.min_rd as f64),
            Feature::VarRd => Some(fv.var_rd),
            Feature::Ndiags => fv.ndiags.map(|v| v as f64),
            Feature::NtdiagsRatio => fv.ntdiags_ratio,
            Feature::ErDia => fv.er_dia,
            Feature::ErEll => fv.er_ell,
            Feature::R => fv.r,
        }
    }

    /// Whether the feature is extracted by the time the `format` rule group
    /// is evaluated (groups run DIA, ELL, CSR, COO).
    pub fn available_for(self, format: Format) -> bool {
        match self {
            Feature::ErEll => format != Format::Dia,
            Feature::R => format == Format::Coo,
            _ => true,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::TRAINING
            .iter()
            .chain(&[Feature::AverRd])
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature '{s}'"))
    }
}

/// Tunables of feature extraction and suitability gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub true_diag_threshold: f64,
    pub fill_limit: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            true_diag_threshold: DEFAULT_TRUE_DIAG_THRESHOLD,
            fill_limit: DEFAULT_FILL_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiaFeatures {
    pub ndiags: usize,
    pub er_dia: Option<f64>,
    pub ntdiags_ratio: Option<f64>,
}

/// M, N, NNZ and the row-degree statistics, in one pass over `row_ptr`.
pub fn basic_features<T: Scalar>(a: &CsrMatrix<T>) -> FeatureVector {
    let m = a.nrows();
    let nnz = a.nnz();
    let aver_rd = if m == 0 { 0.0 } else { nnz as f64 / m as f64 };
    let (mut max_rd, mut min_rd, mut sq) = (0usize, usize::MAX, 0.0f64);
    for d in a.row_degrees() {
        max_rd = max_rd.max(d);
        min_rd = min_rd.min(d);
        let dev = d as f64 - aver_rd;
        sq += dev * dev;
    }
    FeatureVector {
        m,
        n: a.ncols(),
        nnz,
        aver_rd,
        max_rd,
        min_rd: if m == 0 { 0 } else { min_rd },
        var_rd: if m == 0 { 0.0 } else { sq / m as f64 },
        ..FeatureVector::default()
    }
}

/// Length of the diagonal at `offset` inside an `m x n` rectangle.
pub fn diagonal_length(m: usize, n: usize, offset: isize) -> usize {
    if offset >= 0 {
        m.min(n.saturating_sub(offset as usize))
    } else {
        n.min(m.saturating_sub(offset.unsigned_abs()))
    }
}

/// Ndiags, ER_DIA and NTdiags_ratio from per-offset occupancy counts.
pub fn dia_features<T: Scalar>(a: &CsrMatrix<T>, true_diag_threshold: f64) -> DiaFeatures {
    let (m, n) = (a.nrows(), a.ncols());
    let base = m as isize;
    let mut occupancy = vec![0usize; m + n];
    for row in 0..m {
        for &col in a.row_cols(row) {
            occupancy[(col as isize - row as isize + base) as usize] += 1;
        }
    }
    let mut ndiags = 0;
    let mut ntrue = 0;
    for (slot, &count) in occupancy.iter().enumerate() {
        if count == 0 {
            continue;
        }
        ndiags += 1;
        let len = diagonal_length(m, n, slot as isize - base);
        if count as f64 / len as f64 > true_diag_threshold {
            ntrue += 1;
        }
    }
    let nnz = a.nnz();
    DiaFeatures {
        ndiags,
        er_dia: (ndiags > 0).then(|| nnz as f64 / (ndiags as f64 * m as f64)),
        ntdiags_ratio: (ndiags > 0).then(|| ntrue as f64 / ndiags as f64),
    }
}

/// ER_ELL = NNZ / (max_RD * M), from already computed basic features.
pub fn ell_features(basic: &FeatureVector) -> Option<f64> {
    let slots = basic.max_rd * basic.m;
    (slots > 0).then(|| basic.nnz as f64 / slots as f64)
}

/// Histogram `P(k)` of positive row degrees; `P(k) = rows with degree k / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    points: Vec<(usize, f64)>,
}

impl DegreeDistribution {
    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut counts: Vec<usize> = Vec::new();
        let mut m = 0usize;
        for d in degrees {
            m += 1;
            if d == 0 {
                continue;
            }
            if counts.len() <= d {
                counts.resize(d + 1, 0);
            }
            counts[d] += 1;
        }
        let points = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k, c as f64 / m as f64))
            .collect();
        Self { points }
    }

    /// From explicit `(k, P(k))` pairs; pairs with `k = 0` or `P <= 0` are dropped.
    pub fn from_points(points: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut points: Vec<_> = points.into_iter().filter(|&(k, p)| k > 0 && p > 0.0).collect();
        points.sort_by_key(|&(k, _)| k);
        Self { points }
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    /// Least-squares fit of `log P(k) = c - R log k`; `None` with fewer than
    /// two distinct degrees.
    pub fn fit_exponent(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(k, p)| (sx + (k as f64).ln(), sy + p.ln()));
        let (mx, my) = (sx / n, sy / n);
        let (sxy, sxx) = self.points.iter().fold((0.0, 0.0), |(sxy, sxx), &(k, p)| {
            let dx = (k as f64).ln() - mx;
            (sxy + dx * (p.ln() - my), sxx + dx * dx)
        });
        Some(-(sxy / sxx))
    }
}

/// Power-law factor R of the row-degree distribution.
pub fn powerlaw_r<T: Scalar>(a: &CsrMatrix<T>) -> Option<f64> {
    DegreeDistribution::from_degrees(a.row_degrees()).fit_exponent()
}

/// Counts of stage invocations, for checking early exit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionCounts {
    pub basic: usize,
    pub dia: usize,
    pub ell: usize,
    pub powerlaw: usize,
}

/// Lazily computes feature stages for one matrix, each at most once.
#[derive(Debug)]
pub struct FeatureExtractor<'a, T> {
    matrix: &'a CsrMatrix<T>,
    config: FeatureConfig,
    features: Option<FeatureVector>,
    counts: ExtractionCounts,
}

impl<'a, T: Scalar> FeatureExtractor<'a, T> {
    pub fn new(matrix: &'a CsrMatrix<T>, config: FeatureConfig) -> Self {
        Self {
            matrix,
            config,
            features: None,
            counts: ExtractionCounts::default(),
        }
    }

    pub fn counts(&self) -> ExtractionCounts {
        self.counts
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    fn features_mut(&mut self) -> &mut FeatureVector {
        if self.features.is_none() {
            self.counts.basic += 1;
            self.features = Some(basic_features(self.matrix));
        }
        self.features.as_mut().expect("just computed")
    }

    pub fn basic(&mut self) -> &FeatureVector {
        self.features_mut()
    }

    pub fn ensure_dia(&mut self) -> &FeatureVector {
        let (matrix, threshold) = (self.matrix, self.config.true_diag_threshold);
        if !self.features_mut().stages.dia {
            self.counts.dia += 1;
            let d = dia_features(matrix, threshold);
            let fv = self.features_mut();
            fv.ndiags = Some(d.ndiags);
            fv.er_dia = d.er_dia;
            fv.ntdiags_ratio = d.ntdiags_ratio;
            fv.stages.dia = true;
        }
        self.features_mut()
    }

    pub fn ensure_ell(&mut self) -> &FeatureVector {
        if !self.features_mut().stages.ell {
            self.counts.ell += 1;
            let fv = self.features_mut();
            fv.er_ell = ell_features(fv);
            fv.stages.ell = true;
        }
        self.features_mut()
    }

    pub fn ensure_powerlaw(&mut self) -> &FeatureVector {
        let matrix = self.matrix;
        if !self.features_mut().stages.powerlaw {
            self.counts.powerlaw += 1;
            let r = powerlaw_r(matrix);
            let fv = self.features_mut();
            fv.r = r;
            fv.stages.powerlaw = true;
        }
        self.features_mut()
    }

    /// Computes every feature needed before evaluating the `format` group.
    pub fn ensure_stage(&mut self, format: Format) -> &FeatureVector {
        self.ensure_dia();
        if format != Format::Dia {
            self.ensure_ell();
        }
        if format == Format::Coo {
            self.ensure_powerlaw();
        }
        self.features_mut()
    }

    /// All stages.
    pub fn full(&mut self) -> FeatureVector {
        self.ensure_stage(Format::Coo).clone()
    }

    /// DIA fill rule; computes the DIA stage if needed.
    pub fn dia_suitable(&mut self) -> bool {
        let fill = self.config.fill_limit;
        let fv = self.ensure_dia();
        within_fill_limit(fv.ndiags.unwrap_or(0), fv.nnz, fv.m, fill)
    }

    /// ELL fill rule; needs only basic features.
    pub fn ell_suitable(&mut self) -> bool {
        let fill = self.config.fill_limit;
        let fv = self.basic();
        within_fill_limit(fv.max_rd, fv.nnz, fv.m, fill)
    }
}

/// All features at once.
pub fn extract_all<T: Scalar>(a: &CsrMatrix<T>, config: FeatureConfig) -> FeatureVector {
    FeatureExtractor::new(a, config).full()
}

impl FeatureVector {
    pub fn dia_suitable(&self, fill_limit: f64) -> Option<bool> {
        self.ndiags
            .map(|nd| within_fill_limit(nd, self.nnz, self.m, fill_limit))
    }

    pub fn ell_suitable(&self, fill_limit: f64) -> bool {
        within_fill_limit(self.max_rd, self.nnz, self.m, fill_limit)
    }

    /// The 12 feature fields as CSV cells; absent values are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        fn opt<V: fmt::Display>(v: Option<V>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        vec![
            self.m.to_string(),
            self.n.to_string(),
            self.nnz.to_string(),
            self.aver_rd.to_string(),
            self.max_rd.to_string(),
            self.min_rd.to_string(),
            self.var_rd.to_string(),
            opt(self.ndiags),
            opt(self.ntdiags_ratio),
            opt(self.er_dia),
            opt(self.er_ell),
            opt(self.r),
        ]
    }

    /// One CSV line (no trailing newline) with an optional label.
    pub fn to_csv_row(&self, label: Option<&str>) -> String {
        let mut fields = self.csv_fields();
        fields.push(label.unwrap_or_default().to_string());
        fields.join(",")
    }

    /// Parses the first 12 cells of a feature row.
    pub fn from_csv_fields(fields: &[&str]) -> Result<Self, String> {
        if fields.len() < 12 {
            return Err(format!("expected at least 12 fields, found {}", fields.len()));
        }
        fn req<V: FromStr>(name: &str, s: &str) -> Result<V, String> {
            s.trim()
                .parse()
                .map_err(|_| format!("bad value '{s}' for {name}"))
        }
        fn opt<V: FromStr>(name: &str, s: &str) -> Result<Option<V>, String> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                req(name, s).map(Some)
            }
        }
        let ndiags: Option<usize> = opt("ndiags", fields[7])?;
        let er_ell: Option<f64> = opt("er_ell", fields[10])?;
        let r: Option<f64> = opt("r", fields[11])?;
        Ok(Self {
            m: req("m", fields[0])?,
            n: req("n", fields[1])?,
            nnz: req("nnz", fields[2])?,
            aver_rd: req("aver_rd", fields[3])?,
            max_rd: req("max_rd", fields[4])?,
            min_rd: req("min_rd", fields[5])?,
            var_rd: req("var_rd", fields[6])?,
            ndiags,
            ntdiags_ratio: opt("ntdiags_ratio", fields[8])?,
            er_dia: opt("er_dia", fields[9])?,
            er_ell,
            r,
            stages: Stages {
                dia: ndiags.is_some(),
                ell: er_ell.is_some(),
                powerlaw: true,
            },
        })
    }
}
