//! IID and label-shard partitioning of a corpus across clients.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::SampleSet;
use super::ScenarioError;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionMode {
    /// Uniformly random, equal-sized client sets.
    Iid,
    /// Sort by label, cut into equal shards, give each client
    /// `shards_per_client` random shards without replacement.
    Shard {
        shards_per_client: usize,
        /// Defaults to `clients * shards_per_client`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_shards: Option<usize>,
    },
}

/// Splits `samples` into `clients` index sets. Remainders are dropped.
pub fn partition_dataset(
    samples: &SampleSet,
    clients: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ScenarioError> {
    if clients == 0 {
        return Err(ScenarioError::Data("cannot partition across zero clients".into()));
    }
    let n = samples.len();
    let mut rng = rng::stream(seed, &[rng::tag::PARTITION]);
    match mode {
        PartitionMode::Iid => {
            let per_client = n / clients;
            if per_client == 0 {
                return Err(ScenarioError::Data(format!(
                    "too few samples ({n}) for {clients} clients"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            Ok(order
                .chunks_exact(per_client)
                .take(clients)
                .map(|c| {
                    let mut v = c.to_vec();
                    v.sort_unstable();
                    v
                })
                .collect())
        }
        PartitionMode::Shard {
            shards_per_client,
            total_shards,
        } => {
            let needed = clients * shards_per_client;
            let total = total_shards.unwrap_or(needed);
            if shards_per_client == 0 || needed > total {
                return Err(ScenarioError::Data(format!(
                    "{clients} clients x {shards_per_client} shards exceeds {total} shards"
                )));
            }
            let shard_size = n / total;
            if shard_size == 0 {
                return Err(ScenarioError::Data(format!(
                    "too few samples ({n}) for {total} shards"
                )));
            }
            let mut sorted: Vec<usize> = (0..n).collect();
            sorted.sort_by_key(|&i| (samples.label(i), i));
            let mut shard_ids: Vec<usize> = (0..total).collect();
            shard_ids.shuffle(&mut rng);
            Ok(shard_ids
                .chunks_exact(shards_per_client)
                .take(clients)
                .map(|ids| {
                    let mut v: Vec<usize> = ids
                        .iter()
                        .flat_map(|&s| sorted[s * shard_size..(s + 1) * shard_size].iter().copied())
                        .collect();
                    v.sort_unstable();
                    v
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn labeled(n: usize, classes: u32) -> SampleSet {
        let labels: Vec<u32> = (0..n as u32).map(|i| i % classes).collect();
        let features = (0..n).map(|i| i as f64).collect();
        SampleSet::new(features, labels, 1).unwrap()
    }

    #[test]
    fn iid_sixty_thousand_over_fifty() {
        let set = labeled(60_000, 10);
        let parts = partition_dataset(&set, 50, PartitionMode::Iid, 3).unwrap();
        assert_eq!(parts.len(), 50);
        assert!(parts.iter().all(|p| p.len() == 1200));
        let all: BTreeSet<usize> = parts.iter().flatten().copied().collect();
        assert_eq!(all.len(), 60_000);
    }

    #[test]
    fn single_label_corpus_shards() {
        let set = labeled(100, 1);
        let mode = PartitionMode::Shard {
            shards_per_client: 2,
            total_shards: None,
        };
        let parts = partition_dataset(&set, 2, mode, 0).unwrap();
        for p in &parts {
            assert_eq!(p.len(), 50);
            assert!(p.iter().all(|&i| set.label(i) == 0));
        }
    }

    #[test]
    fn two_shards_give_at_most_two_labels() {
        let set = labeled(1000, 10);
        let mode = PartitionMode::Shard {
            shards_per_client: 2,
            total_shards: None,
        };
        for seed in 0..20 {
            let parts = partition_dataset(&set, 5, mode, seed).unwrap();
            for p in &parts {
                let support: BTreeSet<u32> = p.iter().map(|&i| set.label(i)).collect();
                assert!(support.len() <= 2, "seed {seed}: {support:?}");
            }
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let set = labeled(3, 2);
        let mode = PartitionMode::Shard {
            shards_per_client: 2,
            total_shards: None,
        };
        assert!(partition_dataset(&set, 2, mode, 0).is_err());
        assert!(partition_dataset(&set, 5, PartitionMode::Iid, 0).is_err());
    }
}
