//! Ancestral sampling of complete patient records.
//!
//! Record `i` of a dataset is drawn from its own ChaCha20 stream: the
//! generator is seeded with the dataset seed and the stream number is set to
//! `i`. Records are therefore independent of generation order and of the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Dist, Network};
use crate::par::Execution;

/// One assignment of every network variable, in declaration order. Categorical
/// values are state indices; the count outcome is the raw count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: u64,
    pub values: Vec<u32>,
}

impl PatientRecord {
    pub fn get(&self, var: usize) -> u32 {
        self.values[var]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("sample count must be at least 1")]
    EmptyCount,
}

/// Generator for record `index` of the dataset with `seed`.
pub fn record_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF draw from a discrete distribution given as an iterator of
/// probabilities. Falls back to the last state when rounding leaves the
/// cumulative sum short of `u`.
fn draw_categorical(u: f64, probs: impl Iterator<Item = f64>) -> u32 {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i as u32;
        if u < acc {
            return last;
        }
    }
    last
}

/// Poisson draw by sequential search over the CDF.
pub fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    let u: f64 = rng.gen();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut acc = p;
    while u >= acc {
        k += 1;
        p *= lambda / k as f64;
        if p == 0.0 {
            break;
        }
        acc += p;
    }
    k
}

/// Draws every variable in topological order given its sampled parents.
pub fn sample_record<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Vec<u32> {
    let mut values = vec![0u32; net.len()];
    for &var in net.order() {
        values[var] = match net.dist(var) {
            Dist::PoissonPair { .. } => draw_poisson(rng, net.lambda(var, &values)),
            _ => {
                let u: f64 = rng.gen();
                let card = net.cardinality(var) as u32;
                draw_categorical(u, (0..card).map(|s| net.prob(var, s, &values)))
            }
        };
    }
    values
}

pub fn sample_dataset(net: &Network, config: SampleConfig) -> Result<Vec<PatientRecord>, SampleError> {
    sample_dataset_with(net, config, Execution::default())
}

pub fn sample_dataset_with(
    net: &Network,
    config: SampleConfig,
    exec: Execution,
) -> Result<Vec<PatientRecord>, SampleError> {
    if config.count == 0 {
        return Err(SampleError::EmptyCount);
    }
    Ok(exec.map(config.count, |i| {
        let mut rng = record_rng(config.seed, i as u64);
        PatientRecord { id: i as u64, values: sample_record(net, &mut rng) }
    }))
}
