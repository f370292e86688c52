//! Per-example agreement between pairs of runs, split by whether the pair
//! shares a pretraining seed.

use serde::{Deserialize, Serialize};

use crate::metrics::pearson;
use crate::model::PredictionSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementReport {
    pub same_seed_mean: f64,
    pub diff_seed_mean: f64,
    /// same_seed_mean - diff_seed_mean.
    pub gap: f64,
    pub n_same_pairs: usize,
    pub n_diff_pairs: usize,
    pub task_kind: TaskKind,
}

/// Agreement between two prediction vectors: exact-match fraction for
/// classification, Pearson correlation for regression.
pub fn pair_agreement(a: &[f64], b: &[f64], task_kind: TaskKind) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyIndices);
    }
    match task_kind {
        TaskKind::Classification => {
            let hits = a.iter().zip(b).filter(|(x, y)| x == y).count();
            Ok(hits as f64 / a.len() as f64)
        }
        TaskKind::Regression => pearson(a, b),
    }
}

/// Mean agreement over all unordered run pairs, split into same-seed pairs
/// (same pretraining seed, different fine-tuning run) and different-seed
/// pairs. Self-pairs are excluded.
pub fn agreement_matrix(preds: &PredictionSet, task_kind: TaskKind) -> Result<AgreementReport> {
    let n_runs = preds.n_runs();
    let seed_of: Vec<&str> = preds
        .runs()
        .iter()
        .map(|r| r.pretrain_seed.as_str())
        .collect();
    let columns: Vec<Vec<f64>> = (0..n_runs).map(|j| preds.column(j)).collect();

    let mut same_sum = 0.0;
    let mut same_n = 0usize;
    let mut diff_sum = 0.0;
    let mut diff_n = 0usize;
    for j in 0..n_runs {
        for k in (j + 1)..n_runs {
            let v = pair_agreement(&columns[j], &columns[k], task_kind)?;
            if seed_of[j] == seed_of[k] {
                same_sum += v;
                same_n += 1;
            } else {
                diff_sum += v;
                diff_n += 1;
            }
        }
    }
    if same_n == 0 {
        return Err(Error::InsufficientRuns("same".into()));
    }
    if diff_n == 0 {
        return Err(Error::InsufficientRuns("diff".into()));
    }
    let same_seed_mean = same_sum / same_n as f64;
    let diff_seed_mean = diff_sum / diff_n as f64;
    Ok(AgreementReport {
        same_seed_mean,
        diff_seed_mean,
        gap: same_seed_mean - diff_seed_mean,
        n_same_pairs: same_n,
        n_diff_pairs: diff_n,
        task_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_prediction_set, LabelRow, PredictionRow};
    use proptest::prelude::*;

    #[test]
    fn identical_vectors_agree_fully() {
        let v = pair_agreement(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], TaskKind::Classification)
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn half_agreement() {
        let v = pair_agreement(
            &[1.0, 0.0, 1.0, 1.0],
            &[1.0, 1.0, 1.0, 0.0],
            TaskKind::Classification,
        )
        .unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn affine_image_has_perfect_regression_agreement() {
        let a = [0.1, 0.4, 0.7, 0.2];
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 3.0).collect();
        let v = pair_agreement(&a, &b, TaskKind::Regression).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    fn grid(cols: &[(&str, &str, &[f64])]) -> PredictionSet {
        let n_x = cols[0].2.len();
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
        let labels: Vec<LabelRow> = (0..n_x)
            .map(|i| LabelRow {
                example_id: format!("e{i}"),
                label: 0.0,
                group_id: None,
            })
            .collect();
        build_prediction_set(&rows, &labels).unwrap()
    }

    #[test]
    fn all_identical_columns() {
        let ps = grid(&[
            ("sA", "r0", &[1.0, 0.0]),
            ("sA", "r1", &[1.0, 0.0]),
            ("sB", "r0", &[1.0, 0.0]),
            ("sB", "r1", &[1.0, 0.0]),
        ]);
        let rep = agreement_matrix(&ps, TaskKind::Classification).unwrap();
        assert_eq!(rep.same_seed_mean, 1.0);
        assert_eq!(rep.diff_seed_mean, 1.0);
        assert_eq!(rep.gap, 0.0);
    }

    #[test]
    fn one_run_per_seed_is_insufficient() {
        let ps = grid(&[("sA", "r0", &[1.0, 0.0]), ("sB", "r0", &[1.0, 0.0])]);
        let err = agreement_matrix(&ps, TaskKind::Classification).unwrap_err();
        assert!(matches!(err, Error::InsufficientRuns(which) if which == "same"));
    }

    #[test]
    fn hand_enumerated_fixture() {
        // Within-seed columns identical; across-seed pairs agree on half of
        // the examples: 2 same-pairs at 1.0, 4 diff-pairs at 0.5.
        let ps = grid(&[
            ("sA", "r0", &[1.0, 1.0, 0.0, 0.0]),
            ("sA", "r1", &[1.0, 1.0, 0.0, 0.0]),
            ("sB", "r0", &[1.0, 0.0, 0.0, 1.0]),
            ("sB", "r1", &[1.0, 0.0, 0.0, 1.0]),
        ]);
        let rep = agreement_matrix(&ps, TaskKind::Classification).unwrap();
        assert_eq!(rep.same_seed_mean, 1.0);
        assert_eq!(rep.diff_seed_mean, 0.5);
        assert_eq!(rep.gap, 0.5);
        assert_eq!(rep.n_same_pairs, 2);
        assert_eq!(rep.n_diff_pairs, 4);
    }

    proptest! {
        #[test]
        fn pair_agreement_is_symmetric(
            pairs in proptest::collection::vec((0u8..3, 0u8..3), 2..20),
        ) {
            let a: Vec<f64> = pairs.iter().map(|(x, _)| *x as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|(_, y)| *y as f64).collect();
            for kind in [TaskKind::Classification, TaskKind::Regression] {
                match (pair_agreement(&a, &b, kind), pair_agreement(&b, &a, kind)) {
                    (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (Err(_), Err(_)) => {}
                    (x, y) => prop_assert!(false, "asymmetric outcomes: {x:?} vs {y:?}"),
                }
            }
        }
    }

    #[test]
    fn relabeling_seeds_leaves_report_unchanged() {
        let cols: &[(&str, &str, &[f64])] = &[
            ("sA", "r0", &[1.0, 1.0, 0.0, 0.0]),
            ("sA", "r1", &[1.0, 0.0, 0.0, 0.0]),
            ("sB", "r0", &[1.0, 0.0, 0.0, 1.0]),
            ("sB", "r1", &[0.0, 0.0, 0.0, 1.0]),
        ];
        let renamed: Vec<(&str, &str, &[f64])> = cols
            .iter()
            .map(|(s, r, v)| (if *s == "sA" { "zz" } else { "qq" }, *r, *v))
            .collect();
        let a = agreement_matrix(&grid(cols), TaskKind::Classification).unwrap();
        let b = agreement_matrix(&grid(&renamed), TaskKind::Classification).unwrap();
        assert_eq!(a.same_seed_mean, b.same_seed_mean);
        assert_eq!(a.diff_seed_mean, b.diff_seed_mean);
        assert_eq!(a.gap, b.gap);
    }
}
