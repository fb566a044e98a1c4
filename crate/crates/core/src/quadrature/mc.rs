//! Reproducible Monte Carlo sample banks.
//!
//! Every configuration draws from its own ChaCha stream selected by
//! `(seed, n, k, assignment)`, so results do not depend on scheduling or on
//! which other configurations were evaluated.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Stream selector for one `(n, k, assignment)` configuration.
pub fn stream_id(n: usize, k: usize, assignment: usize) -> u64 {
    ((n as u64) << 48) ^ ((k as u64) << 40) ^ (assignment as u64)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `samples` rows of `parts` Dirichlet(`shape`) fractions followed by `extra`
/// uniform variates, row-major.
pub fn draw(seed: u64, stream: u64, parts: usize, shape: f64, extra: usize, samples: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    let gamma = Gamma::new(shape, 1.0).expect("positive Dirichlet shape");
    let width = parts + extra;
    let mut out = vec![0.0; width * samples];
    for row in out.chunks_exact_mut(width) {
        let mut total = 0.0;
        for g in row[..parts].iter_mut() {
            *g = gamma.sample(&mut rng);
            total += *g;
        }
        for g in row[..parts].iter_mut() {
            *g /= total;
        }
        for u in row[parts..].iter_mut() {
            *u = rng.random::<f64>();
        }
    }
    out
}

type BankKey = (u64, u64, usize, u64, usize, usize);

/// Cached [`draw`]: the series reuses the same bank for every query point.
pub fn bank(seed: u64, stream: u64, parts: usize, shape: f64, extra: usize, samples: usize) -> Arc<Vec<f64>> {
    static BANKS: OnceLock<Mutex<HashMap<BankKey, Arc<Vec<f64>>>>> = OnceLock::new();
    let banks = BANKS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (seed, stream, parts, shape.to_bits(), extra, samples);
    if let Some(b) = banks.lock().expect("bank cache poisoned").get(&key) {
        return Arc::clone(b);
    }
    let fresh = Arc::new(draw(seed, stream, parts, shape, extra, samples));
    banks
        .lock()
        .expect("bank cache poisoned")
        .entry(key)
        .or_insert(fresh)
        .clone()
}
