use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::IoError;
use crate::formats::CsrMatrix;
use crate::scalar::Scalar;

/// Recipe for a deterministic synthetic matrix.
///
/// Textual form is a kind followed by `key=value` pairs, e.g.
/// `banded m=100 offsets=-1,0,1 density=1 seed=3`.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticSpec {
    /// Square matrix whose diagonals at `offsets` keep each slot with
    /// probability `density`.
    Banded {
        m: usize,
        offsets: Vec<isize>,
        density: f64,
        seed: u64,
    },
    /// Square matrix with `degree` random columns per row, each row's degree
    /// shifted by a uniform integer in `[-jitter, jitter]`.
    EllRegular {
        m: usize,
        degree: usize,
        jitter: usize,
        seed: u64,
    },
    /// Square matrix whose row degrees follow `P(k) ~ k^-exponent` over
    /// `[min_degree, max_degree]`.
    PowerLaw {
        m: usize,
        exponent: f64,
        min_degree: usize,
        max_degree: usize,
        seed: u64,
    },
    /// `nnz` distinct uniformly placed entries in an `m x n` matrix.
    Random {
        m: usize,
        n: usize,
        nnz: usize,
        seed: u64,
    },
}

impl SyntheticSpec {
    pub fn banded(m: usize, offsets: &[isize], density: f64) -> Self {
        SyntheticSpec::Banded {
            m,
            offsets: offsets.to_vec(),
            density,
            seed: 0,
        }
    }

    pub fn ell_regular(m: usize, degree: usize, jitter: usize) -> Self {
        SyntheticSpec::EllRegular {
            m,
            degree,
            jitter,
            seed: 0,
        }
    }

    pub fn powerlaw(m: usize, exponent: f64, min_degree: usize, max_degree: usize, seed: u64) -> Self {
        SyntheticSpec::PowerLaw {
            m,
            exponent,
            min_degree,
            max_degree,
            seed,
        }
    }

    pub fn random(m: usize, n: usize, nnz: usize, seed: u64) -> Self {
        SyntheticSpec::Random { m, n, nnz, seed }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            SyntheticSpec::Banded { seed, .. }
            | SyntheticSpec::EllRegular { seed, .. }
            | SyntheticSpec::PowerLaw { seed, .. }
            | SyntheticSpec::Random { seed, .. } => *seed = new_seed,
        }
        self
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SyntheticSpec::Banded { .. } => "banded",
            SyntheticSpec::EllRegular { .. } => "ell_regular",
            SyntheticSpec::PowerLaw { .. } => "powerlaw",
            SyntheticSpec::Random { .. } => "random",
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let invalid = |msg: String| Err(IoError::InvalidSpec(msg));
        match self {
            SyntheticSpec::Banded { m, offsets, density, .. } => {
                if *m == 0 {
                    return invalid("banded: m must be positive".into());
                }
                if !(0.0..=1.0).contains(density) {
                    return invalid(format!("banded: density {density} outside [0, 1]"));
                }
                if let Some(off) = offsets.iter().find(|o| o.unsigned_abs() >= *m) {
                    return invalid(format!("banded: offset {off} outside a {m}x{m} matrix"));
                }
            }
            SyntheticSpec::EllRegular { m, degree, .. } => {
                if *m == 0 || degree > m {
                    return invalid(format!("ell_regular: degree {degree} invalid for m={m}"));
                }
            }
            SyntheticSpec::PowerLaw {
                m,
                exponent,
                min_degree,
                max_degree,
                ..
            } => {
                if *m == 0 || *min_degree == 0 || min_degree > max_degree || max_degree > m {
                    return invalid(format!(
                        "powerlaw: need 1 <= min_degree <= max_degree <= m (got {min_degree}, {max_degree}, {m})"
                    ));
                }
                if !exponent.is_finite() || *exponent < 0.0 {
                    return invalid(format!("powerlaw: exponent {exponent} must be finite and >= 0"));
                }
            }
            SyntheticSpec::Random { m, n, nnz, .. } => {
                if nnz > &(m * n) {
                    return invalid(format!("random: {nnz} entries do not fit {m}x{n}"));
                }
            }
        }
        Ok(())
    }
}

fn value<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let mag: f64 = rng.gen_range(0.5..1.5);
    T::from_f64_lossy(if rng.gen_bool(0.5) { mag } else { -mag })
}

/// CSR from per-row degrees with distinct random columns.
fn from_degrees<T: Scalar>(rng: &mut ChaCha8Rng, ncols: usize, degrees: &[usize]) -> CsrMatrix<T> {
    let mut row_ptr = Vec::with_capacity(degrees.len() + 1);
    row_ptr.push(0);
    let total: usize = degrees.iter().sum();
    let mut col_idx = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for &d in degrees {
        let mut cols = sample(rng, ncols, d).into_vec();
        cols.sort_unstable();
        for c in cols {
            col_idx.push(c);
            values.push(value(rng));
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::new(degrees.len(), ncols, row_ptr, col_idx, values).expect("generated rows are canonical")
}

/// Degree sequence for the power-law generator: stratified inverse-CDF
/// sampling, with the tail cut where fewer than one row is expected.
pub fn powerlaw_degrees(rng: &mut ChaCha8Rng, m: usize, exponent: f64, min_degree: usize, max_degree: usize) -> Vec<usize> {
    let weight = |k: usize| (k as f64).powf(-exponent);
    let z: f64 = (min_degree..=max_degree).map(weight).sum();
    let ks: Vec<usize> = (min_degree..=max_degree)
        .filter(|&k| k == min_degree || m as f64 * weight(k) / z >= 1.0)
        .collect();
    let z: f64 = ks.iter().map(|&k| weight(k)).sum();
    let mut cdf = Vec::with_capacity(ks.len());
    let mut acc = 0.0;
    for &k in &ks {
        acc += weight(k) / z;
        cdf.push(acc);
    }
    let mut degrees: Vec<usize> = (0..m)
        .map(|i| {
            let u = (i as f64 + rng.gen::<f64>()) / m as f64;
            let idx = cdf.partition_point(|&c| c < u).min(ks.len() - 1);
            ks[idx]
        })
        .collect();
    degrees.shuffle(rng);
    degrees
}

/// A deterministic mix of the four generator kinds, cycling banded,
/// ELL-regular, power-law and random, with row counts in `[min_rows, max_rows]`.
pub fn mixed_corpus(count: usize, min_rows: usize, max_rows: usize, seed: u64) -> Vec<SyntheticSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = min_rows.max(16);
    let hi = max_rows.max(lo);
    (0..count)
        .map(|i| {
            let m = rng.gen_range(lo..=hi);
            let s = rng.gen::<u64>();
            match i % 4 {
                0 => {
                    let half = rng.gen_range(0..=6isize);
                    let mut offsets: Vec<isize> = (-half..=half).collect();
                    if rng.gen_bool(0.3) {
                        let far = (m as isize / 2).max(1);
                        offsets.push(rng.gen_range(1..far));
                        offsets.push(-rng.gen_range(1..far));
                    }
                    let density = *[1.0, 1.0, 0.9, 0.7].choose(&mut rng).expect("non-empty");
                    SyntheticSpec::Banded {
                        m,
                        offsets,
                        density,
                        seed: s,
                    }
                }
                1 => SyntheticSpec::EllRegular {
                    m,
                    degree: rng.gen_range(2..=12).min(m),
                    jitter: *[0, 0, 1, 2].choose(&mut rng).expect("non-empty"),
                    seed: s,
                },
                2 => SyntheticSpec::PowerLaw {
                    m,
                    exponent: rng.gen_range(1.8..3.0),
                    min_degree: 1,
                    max_degree: (m / 8).clamp(1, 500),
                    seed: s,
                },
                _ => SyntheticSpec::Random {
                    m,
                    n: m,
                    nnz: (m * rng.gen_range(2..=24)).min(m * m),
                    seed: s,
                },
            }
        })
        .collect()
}

/// Builds the matrix described by `spec`; identical specs give identical matrices.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<CsrMatrix<T>, IoError> {
    spec.validate()?;
    Ok(match spec {
        SyntheticSpec::Banded {
            m,
            offsets,
            density,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut offs = offsets.clone();
            offs.sort_unstable();
            offs.dedup();
            let mut row_ptr = vec![0];
            let mut col_idx = Vec::new();
            let mut values = Vec::new();
            for i in 0..*m {
                for &off in &offs {
                    let j = i as isize + off;
                    if j < 0 || j >= *m as isize {
                        continue;
                    }
                    if *density >= 1.0 || rng.gen_bool(*density) {
                        col_idx.push(j as usize);
                        values.push(value(&mut rng));
                    }
                }
                row_ptr.push(col_idx.len());
            }
            CsrMatrix::new(*m, *m, row_ptr, col_idx, values).expect("banded rows are canonical")
        }
        SyntheticSpec::EllRegular { m, degree, jitter, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let degrees: Vec<usize> = (0..*m)
                .map(|_| {
                    let shift = if *jitter == 0 {
                        0
                    } else {
                        rng.gen_range(-(*jitter as i64)..=*jitter as i64)
                    };
                    (*degree as i64 + shift).clamp(0, *m as i64) as usize
                })
                .collect();
            from_degrees(&mut rng, *m, &degrees)
        }
        SyntheticSpec::PowerLaw {
            m,
            exponent,
            min_degree,
            max_degree,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let degrees = powerlaw_degrees(&mut rng, *m, *exponent, *min_degree, *max_degree);
            from_degrees(&mut rng, *m, &degrees)
        }
        SyntheticSpec::Random { m, n, nnz, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut slots = sample(&mut rng, m * n, *nnz).into_vec();
            slots.sort_unstable();
            let mut row_ptr = vec![0usize; m + 1];
            for &s in &slots {
                row_ptr[s / n + 1] += 1;
            }
            for i in 0..*m {
                row_ptr[i + 1] += row_ptr[i];
            }
            let col_idx = slots.iter().map(|s| s % n).collect();
            let values = (0..*nnz).map(|_| value(&mut rng)).collect();
            CsrMatrix::new(*m, *n, row_ptr, col_idx, values).expect("sorted slots are canonical")
        }
    })
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::Banded {
                m,
                offsets,
                density,
                seed,
            } => {
                let offs: Vec<String> = offsets.iter().map(|o| o.to_string()).collect();
                write!(f, "banded m={m} offsets={} density={density} seed={seed}", offs.join(","))
            }
            SyntheticSpec::EllRegular { m, degree, jitter, seed } => {
                write!(f, "ell_regular m={m} degree={degree} jitter={jitter} seed={seed}")
            }
            SyntheticSpec::PowerLaw {
                m,
                exponent,
                min_degree,
                max_degree,
                seed,
            } => write!(
                f,
                "powerlaw m={m} exponent={exponent} min_degree={min_degree} max_degree={max_degree} seed={seed}"
            ),
            SyntheticSpec::Random { m, n, nnz, seed } => write!(f, "random m={m} n={n} nnz={nnz} seed={seed}"),
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = s.split_whitespace();
        let kind = tokens
            .next()
            .ok_or_else(|| IoError::InvalidSpec("empty generator spec".into()))?;
        let mut pairs = std::collections::BTreeMap::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| IoError::InvalidSpec(format!("expected key=value, got '{t}'")))?;
            pairs.insert(k.to_string(), v.to_string());
        }
        fn get<V: FromStr>(
            pairs: &std::collections::BTreeMap<String, String>,
            key: &str,
            default: Option<V>,
        ) -> Result<V, IoError> {
            match pairs.get(key) {
                Some(v) => v
                    .parse()
                    .map_err(|_| IoError::InvalidSpec(format!("bad value '{v}' for {key}"))),
                None => default.ok_or_else(|| IoError::InvalidSpec(format!("missing {key}"))),
            }
        }
        let seed = get(&pairs, "seed", Some(0u64))?;
        let spec = match kind {
            "banded" => {
                let offsets = pairs
                    .get("offsets")
                    .ok_or_else(|| IoError::InvalidSpec("missing offsets".into()))?
                    .split(',')
                    .map(|o| {
                        o.parse::<isize>()
                            .map_err(|_| IoError::InvalidSpec(format!("bad offset '{o}'")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                SyntheticSpec::Banded {
                    m: get(&pairs, "m", None)?,
                    offsets,
                    density: get(&pairs, "density", Some(1.0))?,
                    seed,
                }
            }
            "ell_regular" => SyntheticSpec::EllRegular {
                m: get(&pairs, "m", None)?,
                degree: get(&pairs, "degree", None)?,
                jitter: get(&pairs, "jitter", Some(0))?,
                seed,
            },
            "powerlaw" => SyntheticSpec::PowerLaw {
                m: get(&pairs, "m", None)?,
                exponent: get(&pairs, "exponent", None)?,
                min_degree: get(&pairs, "min_degree", Some(1))?,
                max_degree: get(&pairs, "max_degree", None)?,
                seed,
            },
            "random" => {
                let m = get(&pairs, "m", None)?;
                SyntheticSpec::Random {
                    m,
                    n: get(&pairs, "n", Some(m))?,
                    nnz: get(&pairs, "nnz", None)?,
                    seed,
                }
            }
            other => return Err(IoError::InvalidSpec(format!("unknown generator '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
