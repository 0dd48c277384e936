//! Sensitive-sample marking and the one-time offload of non-sensitive samples.

use rand::seq::SliceRandom;

use super::{DatasetHandle, Scenario, ScenarioError};
use crate::rng;

/// Slack allowed when comparing α against α^max.
const ALPHA_TOL: f64 = 1e-12;

/// round(α|D|), ties to even.
pub fn offload_count(alpha: f64, dataset_size: usize) -> usize {
    (alpha * dataset_size as f64).round_ties_even().max(0.0) as usize
}

/// Quantizes α to the fraction actually transferred.
pub fn quantize_alpha(alpha: f64, dataset_size: usize) -> f64 {
    if dataset_size == 0 {
        0.0
    } else {
        offload_count(alpha, dataset_size) as f64 / dataset_size as f64
    }
}

/// Splits a client's samples into sensitive and non-sensitive parts, drawing
/// `round(fraction · n)` sensitive samples uniformly at random.
pub fn mark_sensitive(indices: &[usize], fraction: f64, seed: u64, client_id: u32) -> DatasetHandle {
    let n_sensitive = offload_count(fraction.clamp(0.0, 1.0), indices.len());
    let mut order = indices.to_vec();
    order.sort_unstable();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::SENSITIVE, u64::from(client_id)]));
    let (sensitive, nonsensitive) = order.split_at(n_sensitive);
    DatasetHandle::new(sensitive.to_vec(), nonsensitive.to_vec())
}

/// Materializes offloaded and retained sets for the given per-client α.
///
/// Selection depends only on the scenario seed, the client id and α, so the
/// operation is idempotent.
pub fn apply_offload(scenario: &Scenario, alpha: &[f64]) -> Result<Scenario, ScenarioError> {
    if alpha.len() != scenario.num_clients() {
        return Err(ScenarioError::Offload(format!(
            "expected {} offload fractions, got {}",
            scenario.num_clients(),
            alpha.len()
        )));
    }
    let mut clients = scenario.clients().to_vec();
    for (c, &a) in clients.iter_mut().zip(alpha) {
        if !(a >= 0.0) || a > c.max_offload_fraction + ALPHA_TOL {
            return Err(ScenarioError::Offload(format!(
                "client {}: α = {a} outside [0, {}]",
                c.id, c.max_offload_fraction
            )));
        }
        let count = offload_count(a, c.dataset.len());
        if count > c.dataset.nonsensitive.len() {
            return Err(ScenarioError::Offload(format!(
                "client {}: {count} samples requested but only {} are non-sensitive",
                c.id,
                c.dataset.nonsensitive.len()
            )));
        }
        let mut pool = c.dataset.nonsensitive.clone();
        pool.shuffle(&mut rng::stream(scenario.seed(), &[rng::tag::OFFLOAD, u64::from(c.id)]));
        let mut offloaded = pool[..count].to_vec();
        offloaded.sort_unstable();
        let mut retained: Vec<usize> = c
            .dataset
            .sensitive
            .iter()
            .copied()
            .chain(pool[count..].iter().copied())
            .collect();
        retained.sort_unstable();
        c.dataset.offloaded = offloaded;
        c.dataset.retained = retained;
    }
    Ok(scenario.with_clients(clients))
}

/// The satellite dataset of cluster `j`: the union of its members' offloaded samples.
pub fn satellite_dataset(scenario: &Scenario, j: usize) -> Vec<usize> {
    scenario
        .members(j)
        .iter()
        .flat_map(|&k| scenario.client(k).dataset.offloaded.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference::ReferenceParams;
    use crate::scenario::validate_scenario;
    use std::collections::BTreeSet;

    fn reference() -> Scenario {
        validate_scenario(ReferenceParams::default().without_data().spec(5)).unwrap()
    }

    #[test]
    fn zero_alpha_is_identity() {
        let s = reference();
        let out = apply_offload(&s, &vec![0.0; s.num_clients()]).unwrap();
        for c in out.clients() {
            assert!(c.dataset.offloaded.is_empty());
            assert_eq!(c.dataset.retained, c.dataset.all());
        }
    }

    #[test]
    fn full_offload_moves_960_of_1200() {
        let s = reference();
        let out = apply_offload(&s, &vec![0.8; s.num_clients()]).unwrap();
        for c in out.clients() {
            assert_eq!(c.dataset.offloaded.len(), 960);
            assert_eq!(c.dataset.retained.len(), 240);
        }
        assert_eq!(satellite_dataset(&out, 0).len(), 9600);
    }

    #[test]
    fn half_of_a_thousand_with_six_hundred_nonsensitive() {
        let handle = mark_sensitive(&(0..1000).collect::<Vec<_>>(), 0.4, 9, 0);
        assert_eq!(handle.nonsensitive.len(), 600);
        let mut spec = ReferenceParams::default().without_data().spec(2);
        spec.clients[0].dataset = handle;
        spec.clients[0].max_offload_fraction = 0.6;
        let s = validate_scenario(spec).unwrap();
        let mut alpha = vec![0.0; s.num_clients()];
        alpha[0] = 0.5;
        let out = apply_offload(&s, &alpha).unwrap();
        let d = &out.client(0).dataset;
        assert_eq!(d.offloaded.len(), 500);
        assert_eq!(d.retained.len(), 500);
        let retained: BTreeSet<_> = d.retained.iter().collect();
        assert!(d.sensitive.iter().all(|i| retained.contains(i)));
        let ns: BTreeSet<_> = d.nonsensitive.iter().collect();
        assert!(d.offloaded.iter().all(|i| ns.contains(i)));
    }

    #[test]
    fn idempotent_and_bounded() {
        let s = reference();
        let alpha = vec![0.37; s.num_clients()];
        let a = apply_offload(&s, &alpha).unwrap();
        let b = apply_offload(&a, &alpha).unwrap();
        for (x, y) in a.clients().iter().zip(b.clients()) {
            assert_eq!(x.dataset, y.dataset);
        }
        assert!(apply_offload(&s, &vec![0.81; s.num_clients()]).is_err());
        assert!(apply_offload(&s, &vec![-0.1; s.num_clients()]).is_err());
    }

    #[test]
    fn quantization_ties_to_even() {
        assert_eq!(offload_count(0.5, 5), 2);
        assert_eq!(offload_count(0.5, 7), 4);
        assert_eq!(quantize_alpha(0.3333, 3), 1.0 / 3.0);
    }
}
