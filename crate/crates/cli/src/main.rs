use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spmv_tune::autotuner::{
    amortization_calls, amortization_threshold, brute_force, tune, TuneConfig, TuneError, DEFAULT_CONFIDENCE_THRESHOLD,
};
use spmv_tune::features::{extract_all, FeatureConfig, CSV_HEADER, DEFAULT_TRUE_DIAG_THRESHOLD};
use spmv_tune::formats::{CsrMatrix, Format, FormatError, SparseMatrix, DEFAULT_FILL_LIMIT};
use spmv_tune::io::{generate_synthetic, load_corpus, mixed_corpus, read_csr, IoError, SyntheticSpec};
use spmv_tune::kernels::{spmv_parallel, KernelError};
use spmv_tune::mining::{
    label_corpus, tailor_rules, train_tree, tree_to_rules, Dataset, LabelConfig, MiningError, RuleSet, TreeParams,
    DEFAULT_ACCURACY_GAP,
};
use spmv_tune::timing::{gflops, random_vector, TimingConfig};
use spmv_tune::{Precision, Scalar};

/// Pick a sparse storage format per matrix and run SpMV with it.
#[derive(Debug, Parser)]
#[command(name = "spmv-tune", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Kernel and labeling threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Floating-point precision: single or double.
    #[arg(long, global = true, default_value = "double")]
    precision: Precision,
    /// Confidence a rule group must exceed to skip measurement.
    #[arg(long, global = true, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    threshold: f64,
    /// DIA/ELL are unsuitable beyond this many lanes per average row degree.
    #[arg(long, global = true, default_value_t = DEFAULT_FILL_LIMIT)]
    fill_limit: f64,
    /// Occupancy above which a diagonal counts as true.
    #[arg(long, global = true, default_value_t = DEFAULT_TRUE_DIAG_THRESHOLD)]
    true_diag_threshold: f64,
    /// Seed for the measurement vector and generators.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Untimed runs before measuring.
    #[arg(long, global = true)]
    warmup: Option<usize>,
    /// Timed runs; the median is reported.
    #[arg(long, global = true)]
    repeats: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the feature vector of a matrix as CSV.
    Features { matrix: String },
    /// Measure every format on a corpus and write the labeled dataset CSV.
    Label { manifest: PathBuf },
    /// Train and tailor a ruleset from a corpus or a labeled dataset.
    Train {
        /// Corpus manifest to label first.
        manifest: Option<PathBuf>,
        /// Use an existing dataset CSV instead of labeling.
        #[arg(long, conflicts_with = "manifest")]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        min_leaf: usize,
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
        /// Allowed training-error increase when shortening the rule list.
        #[arg(long, default_value_t = DEFAULT_ACCURACY_GAP)]
        gap: f64,
        /// Platform name recorded in the ruleset metadata.
        #[arg(long, default_value = "local")]
        platform: String,
    },
    /// Tune one matrix and print the report.
    Tune {
        matrix: String,
        /// Ruleset file; the built-in observation rules when absent.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Tune each thread's row segment separately.
        #[arg(long)]
        heterogeneous: bool,
    },
    /// Compare tuned choices against exhaustive measurement over a corpus.
    Bench {
        manifest: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Compute y = A x.
    Spmv {
        matrix: String,
        /// File with one x value per line; a seeded random x when absent.
        #[arg(long)]
        x: Option<PathBuf>,
        /// Force a storage format instead of tuning.
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Calls needed before tuning pays off.
    Amortize {
        /// Tuning overhead in CSR-SpMV units.
        #[arg(long)]
        overhead: f64,
        /// Speedup of the tuned kernel over CSR.
        #[arg(long)]
        speedup: f64,
    },
    /// Write a manifest of synthetic generator specs.
    Generate {
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value_t = 1000)]
        min_rows: usize,
        #[arg(long, default_value_t = 20000)]
        max_rows: usize,
    },
}

/// Bad input data, as opposed to a bug or environment failure.
#[derive(Debug)]
struct DataError(String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn data_err(msg: impl Into<String>) -> anyhow::Error {
    DataError(msg.into()).into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<DataError>()
            || cause.is::<IoError>()
            || cause.is::<FormatError>()
            || cause.is::<KernelError>()
            || cause.is::<MiningError>()
            || cause.is::<TuneError>()
            || cause.is::<io::Error>()
        {
            return 2;
        }
    }
    3
}

impl Common {
    fn features(&self) -> FeatureConfig {
        FeatureConfig {
            true_diag_threshold: self.true_diag_threshold,
            fill_limit: self.fill_limit,
        }
    }

    fn timing(&self, default: TimingConfig) -> TimingConfig {
        TimingConfig {
            warmup: self.warmup.unwrap_or(default.warmup),
            repeats: self.repeats.unwrap_or(default.repeats).max(1),
        }
    }

    fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            threshold: self.threshold,
            timing: self.timing(TimingConfig::ONCE),
            features: self.features(),
            threads: self.threads.max(1),
            seed: self.seed,
            ..TuneConfig::default()
        }
    }

    fn label_config(&self) -> LabelConfig {
        LabelConfig {
            timing: self.timing(TimingConfig::LABELING),
            features: self.features(),
            threads: self.threads.max(1),
            seed: self.seed,
        }
    }

    fn out(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

/// A Matrix Market path, or `gen:<spec>` for a synthetic matrix.
fn load_matrix<T: Scalar>(arg: &str) -> Result<CsrMatrix<T>> {
    if let Some(spec) = arg.strip_prefix("gen:") {
        let spec: SyntheticSpec = spec.parse()?;
        return Ok(generate_synthetic(&spec)?);
    }
    let file = File::open(arg).map_err(|e| IoError::File {
        path: arg.to_string(),
        source: Box::new(e.into()),
    })?;
    read_csr(BufReader::new(file))
        .map(|(_, a)| a)
        .map_err(|e| {
            IoError::File {
                path: arg.to_string(),
                source: Box::new(e),
            }
            .into()
        })
}

fn load_rules(path: Option<&Path>) -> Result<RuleSet> {
    match path {
        None => Ok(RuleSet::observation_rules()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RuleSet::parse(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn load_entries<T: Scalar>(manifest: &Path) -> Result<Vec<(String, CsrMatrix<T>)>> {
    let corpus = load_corpus::<T>(manifest, spmv_tune::io::DEFAULT_MIN_ROWS)
        .with_context(|| format!("loading {}", manifest.display()))?;
    if corpus.is_empty() {
        return Err(data_err(format!("{}: corpus is empty", manifest.display())));
    }
    Ok(corpus.into_iter().map(|e| (e.source.id, e.matrix)).collect())
}

fn cmd_features<T: Scalar>(c: &Common, matrix: &str) -> Result<()> {
    let a: CsrMatrix<T> = load_matrix(matrix)?;
    let fv = extract_all(&a, c.features());
    let mut out = c.out()?;
    writeln!(out, "{}", CSV_HEADER[..12].join(","))?;
    writeln!(out, "{}", fv.csv_fields().join(","))?;
    out.flush()?;
    Ok(())
}

fn label<T: Scalar>(c: &Common, manifest: &Path) -> Result<Dataset> {
    let entries = load_entries::<T>(manifest)?;
    let (dataset, _) = label_corpus(entries.iter().map(|(id, a)| (id.as_str(), a)), &c.label_config());
    if dataset.is_empty() {
        return Err(MiningError::EmptyDataset.into());
    }
    Ok(dataset)
}

fn cmd_label<T: Scalar>(c: &Common, manifest: &Path) -> Result<()> {
    let dataset = label::<T>(c, manifest)?;
    let mut out = c.out()?;
    dataset.write_csv(&mut out)?;
    out.flush()?;
    eprintln!("labeled {} matrices", dataset.len());
    Ok(())
}

fn cmd_train<T: Scalar>(
    c: &Common,
    manifest: Option<&Path>,
    dataset: Option<&Path>,
    params: TreeParams,
    gap: f64,
    platform: &str,
) -> Result<()> {
    let dataset = match (manifest, dataset) {
        (_, Some(path)) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Dataset::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?
        }
        (Some(m), None) => label::<T>(c, m)?,
        (None, None) => bail!(UsageError("train needs a manifest or --dataset".into())),
    };
    let tree = train_tree(&dataset, &params)?;
    let rules = tree_to_rules(&tree, &dataset);
    let report = tailor_rules(&rules, &dataset, gap);
    let mut set = report.ruleset;
    set.set_meta("confidence_threshold", c.threshold);
    set.set_meta("precision", c.precision);
    set.set_meta("platform", platform);
    set.set_meta("training_size", dataset.len());
    let accuracy = 1.0 - set.error_rate(&dataset);
    let mut out = c.out()?;
    write!(out, "{set}")?;
    out.flush()?;
    eprintln!(
        "training accuracy {:.4} with {} of {} rules (tree: {} leaves, depth {})",
        accuracy,
        set.rules.len(),
        rules.rules.len(),
        tree.leaves(),
        tree.depth()
    );
    Ok(())
}

fn cmd_tune<T: Scalar>(c: &Common, matrix: &str, rules: Option<&Path>, json: bool, heterogeneous: bool) -> Result<()> {
    let a: CsrMatrix<T> = load_matrix(matrix)?;
    let rules = load_rules(rules)?;
    let config = TuneConfig {
        heterogeneous,
        ..c.tune_config()
    };
    let tuned = tune(&a, &rules, &config)?;
    let r = &tuned.report;
    let mut out = c.out()?;
    if json {
        let mut value = serde_json::to_value(r)?;
        value["id"] = serde_json::Value::String(matrix.to_string());
        writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    } else {
        writeln!(out, "format={}", r.format)?;
        writeln!(out, "path={}", r.path)?;
        match r.confidence {
            Some(conf) => writeln!(out, "confidence={conf}")?,
            None => writeln!(out, "confidence=")?,
        }
        for t in &r.timings {
            writeln!(out, "time_{}={:.9}", t.format.as_str().to_lowercase(), t.time.as_secs_f64())?;
        }
        if !r.segment_formats.is_empty() {
            let f: Vec<_> = r.segment_formats.iter().map(|f| f.as_str()).collect();
            writeln!(out, "segments={}", f.join(","))?;
        }
        writeln!(out, "overhead_mult={:.3}", r.overhead_mult)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_bench<T: Scalar>(c: &Common, manifest: &Path, rules: Option<&Path>) -> Result<()> {
    let entries = load_entries::<T>(manifest)?;
    let rules = load_rules(rules)?;
    let config = c.tune_config();
    let timing = c.timing(TimingConfig::LABELING);
    let mut out = c.out()?;
    writeln!(
        out,
        "id,gflops_dia,gflops_ell,gflops_csr,gflops_coo,choice,path,choice_gflops,best_format,best_gflops,within_10pct,overhead_mult"
    )?;
    let (mut n, mut within, mut overhead_sum) = (0usize, 0usize, 0.0f64);
    for (id, a) in &entries {
        let tuned = match tune(a, &rules, &config) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("{id}: {e}");
                continue;
            }
        };
        let x: Vec<T> = random_vector(a.ncols(), c.seed);
        let bf = brute_force(a, timing, config.threads, &x, c.fill_limit);
        let g = |f: Format| bf.time_of(f).map(|t| gflops(a.nnz(), t));
        let cells: Vec<String> = Format::ALL
            .iter()
            .map(|&f| g(f).map(|v| format!("{v:.4}")).unwrap_or_default())
            .collect();
        let best = g(bf.best).unwrap_or(0.0);
        let choice = g(tuned.format()).unwrap_or(0.0);
        let ok = choice >= 0.9 * best;
        n += 1;
        within += ok as usize;
        overhead_sum += tuned.report.overhead_mult;
        writeln!(
            out,
            "{},{},{},{},{:.4},{},{:.4},{},{:.3}",
            csv_cell(id),
            cells.join(","),
            tuned.format(),
            tuned.report.path,
            choice,
            bf.best,
            best,
            ok,
            tuned.report.overhead_mult
        )?;
    }
    let frac = if n == 0 { 0.0 } else { within as f64 / n as f64 };
    let mean = if n == 0 { 0.0 } else { overhead_sum / n as f64 };
    writeln!(out, "# summary within_10pct={frac:.4} mean_overhead={mean:.3} matrices={n}")?;
    out.flush()?;
    Ok(())
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read_vector<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut x = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| data_err(format!("{}:{}: bad value '{t}'", path.display(), i + 1)))?;
        x.push(T::from_f64_lossy(v));
    }
    Ok(x)
}

fn cmd_spmv<T: Scalar>(c: &Common, matrix: &str, x: Option<&Path>, format: Option<Format>, rules: Option<&Path>) -> Result<()> {
    let a: CsrMatrix<T> = load_matrix(matrix)?;
    let x: Vec<T> = match x {
        Some(p) => read_vector(p)?,
        None => random_vector(a.ncols(), c.seed),
    };
    let y = match format {
        Some(f) => {
            let m = SparseMatrix::convert(&a, f, c.fill_limit)?;
            spmv_parallel(&m, &x, c.threads.max(1))?
        }
        None => {
            let rules = load_rules(rules)?;
            let tuned = tune(&a, &rules, &c.tune_config())?;
            log::info!("tuned to {} ({})", tuned.format(), tuned.report.path);
            tuned.spmv(&x)?
        }
    };
    let mut out = c.out()?;
    for v in &y {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_amortize(c: &Common, overhead: f64, speedup: f64) -> Result<()> {
    let n_star = amortization_threshold(overhead, speedup)?;
    let mut out = c.out()?;
    writeln!(out, "n* = {n_star}")?;
    writeln!(out, "n > {}", amortization_calls(n_star))?;
    out.flush()?;
    Ok(())
}

fn cmd_generate(c: &Common, count: usize, min_rows: usize, max_rows: usize) -> Result<()> {
    let mut out = c.out()?;
    writeln!(out, "# {count} synthetic matrices, seed {}", c.seed)?;
    for spec in mixed_corpus(count, min_rows, max_rows, c.seed) {
        writeln!(out, "gen {spec}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// The error chain joined with ": ", skipping causes already in the text.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn dispatch<T: Scalar>(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Features { matrix } => cmd_features::<T>(c, matrix),
        Command::Label { manifest } => cmd_label::<T>(c, manifest),
        Command::Train {
            manifest,
            dataset,
            min_leaf,
            max_depth,
            gap,
            platform,
        } => {
            let params = TreeParams {
                min_leaf: *min_leaf,
                max_depth: *max_depth,
                ..TreeParams::default()
            };
            cmd_train::<T>(c, manifest.as_deref(), dataset.as_deref(), params, *gap, platform)
        }
        Command::Tune {
            matrix,
            rules,
            json,
            heterogeneous,
        } => cmd_tune::<T>(c, matrix, rules.as_deref(), *json, *heterogeneous),
        Command::Bench { manifest, rules } => cmd_bench::<T>(c, manifest, rules.as_deref()),
        Command::Spmv { matrix, x, format, rules } => cmd_spmv::<T>(c, matrix, x.as_deref(), *format, rules.as_deref()),
        Command::Amortize { overhead, speedup } => cmd_amortize(c, *overhead, *speedup),
        Command::Generate {
            count,
            min_rows,
            max_rows,
        } => cmd_generate(c, *count, *min_rows, *max_rows),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.common.precision {
        Precision::Single => dispatch::<f32>(&cli),
        Precision::Double => dispatch::<f64>(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.chain().any(|c| c.is::<UsageError>()) {
                return ExitCode::from(1);
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
