//! Intra-cluster and global model aggregation.

use super::{FlError, ModelParams};

fn weighted_mean(models: &[&ModelParams], weights: &[f64]) -> Result<ModelParams, FlError> {
    let first = models
        .first()
        .ok_or_else(|| FlError::EmptyData("aggregating no models".into()))?;
    for m in models {
        if m.layout != first.layout || m.len() != first.len() {
            return Err(FlError::Shape("aggregated models have different layouts".into()));
        }
    }
    let mut values = vec![0.0; first.len()];
    for (m, &w) in models.iter().zip(weights) {
        for (acc, v) in values.iter_mut().zip(&m.values) {
            *acc += w * v;
        }
    }
    let out = ModelParams {
        layout: first.layout,
        values,
    };
    out.check()?;
    Ok(out)
}

/// Eq. 17 weights: the satellite gets Σα_k|D_k|, client k gets (1 − α_k)|D_k|,
/// all divided by Σ|D_k|. The satellite weight comes first.
pub fn aggregation_weights(alpha: &[f64], sizes: &[usize]) -> (f64, Vec<f64>) {
    let total: f64 = sizes.iter().map(|&n| n as f64).sum();
    let sat: f64 = alpha.iter().zip(sizes).map(|(a, &n)| a * n as f64).sum();
    let clients = alpha
        .iter()
        .zip(sizes)
        .map(|(a, &n)| (1.0 - a) * n as f64 / total)
        .collect();
    (sat / total, clients)
}

/// Weighted mean of the satellite model and the client models of one cluster.
///
/// `sat` may be `None` when nothing was offloaded (its weight is then zero).
pub fn intra_cluster_aggregate(
    sat: Option<&ModelParams>,
    clients: &[ModelParams],
    alpha: &[f64],
    sizes: &[usize],
) -> Result<ModelParams, FlError> {
    if clients.len() != alpha.len() || clients.len() != sizes.len() {
        return Err(FlError::Shape(format!(
            "{} client models, {} α, {} sizes",
            clients.len(),
            alpha.len(),
            sizes.len()
        )));
    }
    if sizes.iter().sum::<usize>() == 0 {
        return Err(FlError::EmptyData("cluster holds no samples".into()));
    }
    let (w_sat, w_clients) = aggregation_weights(alpha, sizes);
    let mut models: Vec<&ModelParams> = Vec::with_capacity(clients.len() + 1);
    let mut weights = Vec::with_capacity(clients.len() + 1);
    match sat {
        Some(s) => {
            models.push(s);
            weights.push(w_sat);
        }
        None if w_sat > 0.0 => {
            return Err(FlError::Shape("offloaded samples but no satellite model".into()));
        }
        None => {}
    }
    for (m, w) in clients.iter().zip(w_clients) {
        models.push(m);
        weights.push(w);
    }
    weighted_mean(&models, &weights)
}

/// Unweighted mean of the cluster models (Eq. 20).
pub fn global_aggregate(cluster_models: &[ModelParams]) -> Result<ModelParams, FlError> {
    let w = 1.0 / cluster_models.len() as f64;
    let refs: Vec<&ModelParams> = cluster_models.iter().collect();
    weighted_mean(&refs, &vec![w; refs.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::Layout;
    use proptest::prelude::*;

    fn scalar(v: f64) -> ModelParams {
        // A 1-input, 1-class logistic layout has two parameters; the bias is
        // used as a stand-in scalar and the weight is kept at zero.
        ModelParams {
            layout: Layout::Logistic { inputs: 1, classes: 1 },
            values: vec![0.0, v],
        }
    }

    #[test]
    fn hand_weighted_mean() {
        let out = intra_cluster_aggregate(
            Some(&scalar(1.0)),
            &[scalar(2.0), scalar(4.0)],
            &[0.5, 0.25],
            &[100, 300],
        )
        .unwrap();
        assert!((out.values[1] - 2.8125).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_is_plain_fedavg() {
        let out = intra_cluster_aggregate(None, &[scalar(2.0), scalar(4.0)], &[0.0, 0.0], &[100, 300]).unwrap();
        assert!((out.values[1] - 3.5).abs() < 1e-12);
        let with_sat = intra_cluster_aggregate(Some(&scalar(100.0)), &[scalar(2.0), scalar(4.0)], &[0.0, 0.0], &[100, 300]).unwrap();
        assert_eq!(with_sat.values[1], out.values[1]);
    }

    #[test]
    fn global_mean() {
        let ms: Vec<ModelParams> = (1..=5).map(|v| scalar(v as f64)).collect();
        assert!((global_aggregate(&ms).unwrap().values[1] - 3.0).abs() < 1e-12);
        assert_eq!(global_aggregate(&ms[..1]).unwrap(), ms[0]);
        assert!(global_aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(alpha in proptest::collection::vec(0.0f64..1.0, 1..8), seed in 1usize..5000) {
            let sizes: Vec<usize> = (0..alpha.len()).map(|i| 1 + (seed * (i + 7)) % 997).collect();
            let (s, c) = aggregation_weights(&alpha, &sizes);
            prop_assert!((s + c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn affine_equivariance(vals in proptest::collection::vec(-10.0f64..10.0, 4), shift in -5.0f64..5.0, a in 0.0f64..0.9) {
            let clients: Vec<ModelParams> = vals[1..].iter().map(|&v| scalar(v)).collect();
            let shifted: Vec<ModelParams> = vals[1..].iter().map(|&v| scalar(v + shift)).collect();
            let alpha = [a, a / 2.0, 0.1];
            let sizes = [120, 40, 75];
            let base = intra_cluster_aggregate(Some(&scalar(vals[0])), &clients, &alpha, &sizes).unwrap();
            let moved = intra_cluster_aggregate(Some(&scalar(vals[0] + shift)), &shifted, &alpha, &sizes).unwrap();
            prop_assert!((moved.values[1] - base.values[1] - shift).abs() < 1e-9);
            let g = global_aggregate(&shifted).unwrap();
            let g0 = global_aggregate(&clients).unwrap();
            prop_assert!((g.values[1] - g0.values[1] - shift).abs() < 1e-9);
        }

        #[test]
        fn identical_inputs_are_a_fixed_point(v in -10.0f64..10.0, a in 0.0f64..1.0) {
            let out = intra_cluster_aggregate(Some(&scalar(v)), &[scalar(v), scalar(v)], &[a, 1.0 - a], &[10, 30]).unwrap();
            prop_assert!((out.values[1] - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
