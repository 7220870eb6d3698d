//! Seeded Monte Carlo plumbing.
//!
//! Samples are grouped in fixed chunks of [`CHUNK`]; chunk `k` draws from
//! ChaCha stream `k` of the configured seed. Chunk statistics are merged in
//! chunk order, so results are bit-identical for any rayon thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, seed: 0 }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed }
    }

    /// Same sample budget on an independent stream family.
    pub fn derive(&self, tag: u64) -> Self {
        Self { samples: self.samples, seed: derive_seed(self.seed, tag) }
    }
}

/// How an expectation should be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Closed form only; fails where none exists.
    Exact,
    /// Always sample, even when a closed form exists.
    MonteCarlo(McConfig),
    /// Closed form where available, sampling otherwise.
    Auto(McConfig),
}

impl Sampling {
    pub fn config(&self) -> Option<McConfig> {
        match self {
            Sampling::Exact => None,
            Sampling::MonteCarlo(c) | Sampling::Auto(c) => Some(*c),
        }
    }

    pub fn derive(&self, tag: u64) -> Self {
        match self {
            Sampling::Exact => Sampling::Exact,
            Sampling::MonteCarlo(c) => Sampling::MonteCarlo(c.derive(tag)),
            Sampling::Auto(c) => Sampling::Auto(c.derive(tag)),
        }
    }
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Auto(McConfig::default())
    }
}

/// SplitMix64 finalizer; used to derive independent seeds from one root.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's parallel merge.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + delta * other.count as f64 / n,
            m2: self.m2 + other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / n,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr_of_mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// `sqrt(mean)` with the delta-method standard error.
    pub fn sqrt_mean(&self) -> (f64, f64) {
        let value = self.mean.max(0.0).sqrt();
        let se = if value > 0.0 { self.stderr_of_mean() / (2.0 * value) } else { self.stderr_of_mean().sqrt() };
        (value, se)
    }
}

/// Draws `cfg.samples` values of `f` and returns their moments. `init`
/// builds per-chunk scratch state.
pub fn sample_moments<S, I, F>(cfg: &McConfig, init: I, f: F) -> Moments
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = cfg.samples.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(cfg.seed, k as u64);
            let mut state = init();
            let len = CHUNK.min(cfg.samples - k * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(f(&mut state, &mut rng));
            }
            m
        })
        .collect();
    partials.iter().fold(Moments::default(), |acc, m| acc.merge(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(&b);
        assert_eq!(merged.count, all.count);
        assert!((merged.mean - all.mean).abs() < 1e-12);
        assert!((merged.m2 - all.m2).abs() < 1e-9);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let cfg = McConfig::new(10_000, 42);
        let run = || sample_moments(&cfg, || (), |_, rng| rng.random::<f64>());
        let reference = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(run);
        assert_eq!(reference, single);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
    }
}
