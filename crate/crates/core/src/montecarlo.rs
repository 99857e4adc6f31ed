//! Seed-deterministic parallel Monte Carlo counting.
//!
//! Samples are split into fixed-size chunks; chunk `i` draws from the ChaCha
//! stream `i` of the run seed, so the result depends only on the seed and the
//! sample count, never on the thread count or scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 4096;

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Estimate of `scale · P(hit)` from a Bernoulli count.
    pub fn from_fraction(hits: u64, samples: usize, scale: f64) -> Self {
        let n = samples.max(1) as f64;
        let p = hits as f64 / n;
        Self {
            value: scale * p,
            stderr: scale * (p * (1.0 - p) / n).sqrt(),
        }
    }

    /// True when `target` lies within `z` standard errors.
    pub fn brackets(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.stderr
    }
}

/// The random stream for chunk `chunk` of a run seeded with `seed`.
pub fn stream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Count the samples for which `trial` returns true.
pub fn count<F>(samples: usize, seed: u64, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            (0..n).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// A ray `(ω, η)` uniform on `[0, 2π) × [−r, r]`.
pub fn uniform_ray<R: Rng>(rng: &mut R, r: f64) -> (f64, f64) {
    let w = rng.gen::<f64>() * std::f64::consts::TAU;
    let e = (2.0 * rng.gen::<f64>() - 1.0) * r;
    (w, e)
}
