use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::store::{DatasetStore, Split};

/// `n` train images per class used to build the lookup matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSet {
    /// Image indices per class, ascending.
    pub per_class: Vec<Vec<usize>>,
    pub n: usize,
    pub seed: u64,
}

impl ProbeSet {
    pub fn validate(&self, store: &DatasetStore) -> Result<()> {
        if self.per_class.len() != store.num_classes() {
            return Err(Error::InvalidProbeSet("one index list per class required"));
        }
        for (class, indices) in self.per_class.iter().enumerate() {
            if indices.len() != self.n {
                return Err(Error::InvalidProbeSet("every class needs exactly n probes"));
            }
            for (pos, &i) in indices.iter().enumerate() {
                if i >= store.images.rows() {
                    return Err(Error::InvalidProbeSet("index out of range"));
                }
                if store.labels[i] as usize != class {
                    return Err(Error::InvalidProbeSet("probe label differs from its class"));
                }
                if store.split[i] != Split::Train {
                    return Err(Error::InvalidProbeSet("probe is not a train image"));
                }
                if indices[..pos].contains(&i) {
                    return Err(Error::InvalidProbeSet("duplicate probe within a class"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `n` distinct train images per class without replacement.
///
/// Classes are visited in ascending id order from a single [`Prng`] stream;
/// each class partially shuffles its ascending train index list and keeps
/// the first `n`, which are then sorted.
pub fn sample_probe_set(store: &DatasetStore, n: usize, seed: u64) -> Result<ProbeSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("probe count n must be at least 1".into()));
    }
    let by_class = store.train_indices_by_class();
    for (class, indices) in by_class.iter().enumerate() {
        if indices.len() < n {
            return Err(Error::InsufficientSamples { class, available: indices.len(), requested: n });
        }
    }
    let mut rng = Prng::new(seed);
    let per_class = by_class
        .into_iter()
        .map(|mut indices| {
            rng.partial_shuffle(&mut indices, n);
            indices.truncate(n);
            indices.sort_unstable();
            indices
        })
        .collect();
    Ok(ProbeSet { per_class, n, seed })
}
