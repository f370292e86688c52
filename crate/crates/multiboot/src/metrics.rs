//! Per-run performance values.
//!
//! `evaluate` computes a metric from a whole prediction column, and
//! `per_seed_values` applies it under the nested rule: evaluate each
//! fine-tuning run on the selected example rows, then average runs within
//! each pretraining seed.

use crate::model::{MetricKind, MetricSpec, PredictionSet};
use crate::{Error, Result};

/// Computes the metric over one prediction column.
pub fn evaluate(metric: MetricSpec, predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyIndices);
    }
    match metric.kind {
        MetricKind::Accuracy => {
            let hits = predictions
                .iter()
                .zip(labels)
                .filter(|(p, l)| p == l)
                .count();
            Ok(hits as f64 / predictions.len() as f64)
        }
        MetricKind::MeanOfScores => {
            Ok(predictions.iter().sum::<f64>() / predictions.len() as f64)
        }
        MetricKind::Pearson => pearson(predictions, labels),
    }
}

/// Sample Pearson correlation; zero variance in either input is an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Checks metric/label compatibility once, up front.
pub fn validate_compatible(preds: &PredictionSet, metric: MetricSpec) -> Result<()> {
    if metric.kind == MetricKind::Accuracy {
        for (i, l) in preds.labels().iter().enumerate() {
            if l.fract() != 0.0 {
                return Err(Error::NonIntegerLabel(preds.example_ids()[i].clone()));
            }
        }
    }
    Ok(())
}

/// Per-seed metric values on the selected (possibly repeated) example rows.
///
/// For each pretraining seed, the metric is evaluated per fine-tuning run and
/// the run values are averaged; repeated indices contribute repeated rows.
pub fn per_seed_values(
    preds: &PredictionSet,
    metric: MetricSpec,
    example_indices: &[usize],
) -> Result<Vec<(String, f64)>> {
    if example_indices.is_empty() {
        return Err(Error::EmptyIndices);
    }
    let n_x = preds.n_x();
    for &i in example_indices {
        if i >= n_x {
            return Err(Error::IndexOutOfRange { index: i, n_x });
        }
    }
    let labels: Vec<f64> = example_indices.iter().map(|&i| preds.labels()[i]).collect();
    let mut col = vec![0.0; example_indices.len()];
    let mut out = Vec::with_capacity(preds.n_s());
    for group in preds.seed_groups() {
        let mut acc = 0.0;
        for &j in &group.run_cols {
            for (slot, &i) in col.iter_mut().zip(example_indices) {
                *slot = preds.value(i, j);
            }
            acc += evaluate(metric, &col, &labels)?;
        }
        out.push((group.seed.clone(), acc / group.run_cols.len() as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_prediction_set, LabelRow, PredictionRow};
    use proptest::prelude::*;

    fn spec(kind: MetricKind) -> MetricSpec {
        MetricSpec::new(kind)
    }

    #[test]
    fn accuracy_counts_matches() {
        let v = evaluate(spec(MetricKind::Accuracy), &[1.0, 0.0, 0.0], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, 2.0 / 3.0);
    }

    #[test]
    fn pearson_perfect_correlation() {
        let v = evaluate(
            spec(MetricKind::Pearson),
            &[0.1, 0.5, 0.9],
            &[0.1, 0.5, 0.9],
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_of_scores_ignores_labels() {
        let v = evaluate(
            spec(MetricKind::MeanOfScores),
            &[0.2, 0.4, 0.9],
            &[9.0, 9.0, 9.0],
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_variance() {
        let err = evaluate(spec(MetricKind::Pearson), &[0.5, 0.5, 0.5], &[0.1, 0.2, 0.3])
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance));
    }

    #[test]
    fn length_mismatch() {
        let err = evaluate(spec(MetricKind::Accuracy), &[1.0], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { left: 1, right: 2 }));
    }

    fn toy_set(cols: &[(&str, &str, &[f64])], labels: &[f64]) -> crate::model::PredictionSet {
        let mut rows = Vec::new();
        for (seed, run, vals) in cols {
            for (i, v) in vals.iter().enumerate() {
                rows.push(PredictionRow {
                    example_id: format!("e{i}"),
                    pretrain_seed: seed.to_string(),
                    finetune_run: run.to_string(),
                    value: *v,
                });
            }
        }
        let label_rows: Vec<LabelRow> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabelRow {
                example_id: format!("e{i}"),
                label: *l,
                group_id: None,
            })
            .collect();
        build_prediction_set(&rows, &label_rows).unwrap()
    }

    #[test]
    fn per_seed_single_run_reduces_to_evaluate() {
        let ps = toy_set(&[("s", "r", &[1.0, 0.0, 0.0])], &[1.0, 0.0, 1.0]);
        let vals = per_seed_values(&ps, spec(MetricKind::Accuracy), &[0, 1, 2]).unwrap();
        assert_eq!(vals, vec![("s".to_string(), 2.0 / 3.0)]);
    }

    #[test]
    fn per_seed_inner_mean_over_runs() {
        // Run accuracies 0.6 and 0.8 on five examples.
        let ps = toy_set(
            &[
                ("s", "r0", &[1.0, 1.0, 1.0, 0.0, 0.0]),
                ("s", "r1", &[1.0, 1.0, 1.0, 1.0, 0.0]),
            ],
            &[1.0, 1.0, 1.0, 1.0, 1.0],
        );
        let vals = per_seed_values(&ps, spec(MetricKind::Accuracy), &[0, 1, 2, 3, 4]).unwrap();
        assert!((vals[0].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn repeated_indices_contribute_repeated_rows() {
        let ps = toy_set(&[("s", "r", &[1.0, 0.0, 0.0])], &[1.0, 0.0, 1.0]);
        let vals = per_seed_values(&ps, spec(MetricKind::Accuracy), &[0, 0, 2]).unwrap();
        // Correctness vector over the resample is (1, 1, 0).
        assert!((vals[0].1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn index_out_of_range() {
        let ps = toy_set(&[("s", "r", &[1.0, 0.0])], &[1.0, 0.0]);
        let err = per_seed_values(&ps, spec(MetricKind::Accuracy), &[0, 5]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 5, n_x: 2 }));
    }

    proptest! {
        #[test]
        fn evaluate_is_permutation_equivariant(
            pairs in proptest::collection::vec((0u8..4, 0u8..4), 2..20),
            perm_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let preds: Vec<f64> = pairs.iter().map(|(p, _)| *p as f64).collect();
            let labels: Vec<f64> = pairs.iter().map(|(_, l)| *l as f64).collect();
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let pp: Vec<f64> = idx.iter().map(|&i| preds[i]).collect();
            let pl: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            for kind in [MetricKind::Accuracy, MetricKind::MeanOfScores] {
                let a = evaluate(spec(kind), &preds, &labels).unwrap();
                let b = evaluate(spec(kind), &pp, &pl).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn doubling_indices_preserves_metrics(
            vals in proptest::collection::vec((0u8..3, 0u8..3), 2..10),
        ) {
            let preds: Vec<f64> = vals.iter().map(|(p, _)| *p as f64).collect();
            let labels: Vec<f64> = vals.iter().map(|(_, l)| *l as f64).collect();
            let dp: Vec<f64> = preds.iter().chain(&preds).copied().collect();
            let dl: Vec<f64> = labels.iter().chain(&labels).copied().collect();
            for kind in [MetricKind::Accuracy, MetricKind::MeanOfScores, MetricKind::Pearson] {
                let a = evaluate(spec(kind), &preds, &labels);
                let b = evaluate(spec(kind), &dp, &dl);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "divergent outcomes: {a:?} vs {b:?}"),
                }
            }
        }
    }
}
