use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub episode: usize,
    /// Fraction of validation instances solved.
    pub coverage: f64,
    /// Summed plan length over solved instances.
    pub total_length: usize,
}

/// Index of the best record: highest coverage, then shortest total length,
/// then a seeded random pick among the remaining ties.
pub fn select_checkpoint(history: &[ValidationRecord], seed: u64) -> Option<usize> {
    let best_cov = history.iter().map(|r| r.coverage).fold(f64::NEG_INFINITY, f64::max);
    let shortest = history
        .iter()
        .filter(|r| r.coverage == best_cov)
        .map(|r| r.total_length)
        .min()?;
    let tied: Vec<usize> = history
        .iter()
        .enumerate()
        .filter(|(_, r)| r.coverage == best_cov && r.total_length == shortest)
        .map(|(i, _)| i)
        .collect();
    tied.choose(&mut ChaCha8Rng::seed_from_u64(seed)).copied()
}
