//! Wall-clock measurement helpers shared by labeling, tuning and benchmarks.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Warmup and repeat counts for one kernel measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingConfig {
    pub warmup: usize,
    pub repeats: usize,
}

impl TimingConfig {
    /// 3 warmup runs and the median of 10 timed runs.
    pub const LABELING: TimingConfig = TimingConfig {
        warmup: 3,
        repeats: 10,
    };
    /// A single untimed-warmup-free run, as used by the runtime fallback.
    pub const ONCE: TimingConfig = TimingConfig {
        warmup: 0,
        repeats: 1,
    };
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self::LABELING
    }
}

/// Runs `f` `warmup` times untimed, then `repeats` timed, returning the
/// median and the total time spent (warmup included).
pub fn measure<F: FnMut()>(config: TimingConfig, mut f: F) -> (Duration, Duration) {
    let total = Instant::now();
    for _ in 0..config.warmup {
        f();
    }
    let mut samples: Vec<Duration> = (0..config.repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .collect();
    samples.sort_unstable();
    (samples[samples.len() / 2], total.elapsed())
}

/// `2 * NNZ` flops per SpMV.
pub fn gflops(nnz: usize, time: Duration) -> f64 {
    let secs = time.as_secs_f64();
    if secs <= 0.0 {
        f64::INFINITY
    } else {
        2.0 * nnz as f64 / secs * 1e-9
    }
}

/// Deterministic pseudo-random input vector in `[-1, 1)`.
pub fn random_vector<T: Scalar>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
        .collect()
}
