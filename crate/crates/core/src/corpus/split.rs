//! Seeded 80/10/10 dataset partitioning.

use rand::Rng;

use super::{CorpusError, SpeakerDomainCorpus};
use crate::rng::derive_rng;

/// Splits a corpus into disjoint train/validation/test parts of sizes
/// `round(0.8 n)` / `round(0.1 n)` / remainder, after a seeded shuffle.
pub fn split_dataset(
    c: &SpeakerDomainCorpus,
    seed: u64,
) -> Result<(SpeakerDomainCorpus, SpeakerDomainCorpus, SpeakerDomainCorpus), CorpusError> {
    let n = c.len();
    if n < 10 {
        return Err(CorpusError::TooSmall { n, need: 10 });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_rng(seed, &format!("split-{}", c.domain_id));
    // Fisher-Yates, hand-rolled so the partition never depends on rand's
    // shuffle internals.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = (0.1 * n as f64).round() as usize;

    let part = |ids: &[usize]| SpeakerDomainCorpus {
        domain_id: c.domain_id.clone(),
        utterances: ids.iter().map(|&i| c.utterances[i].clone()).collect(),
    };
    Ok((
        part(&order[..n_train]),
        part(&order[n_train..n_train + n_val]),
        part(&order[n_train + n_val..]),
    ))
}
