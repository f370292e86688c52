//! Synthetic ground truth and calibration.
//!
//! The generator realizes the three randomness sources with additive
//! zero-mean Gaussian components: a per-seed effect, a per-example effect,
//! and per-cell noise on top of a known mean. `coverage_study` measures how
//! often nominal intervals cover that known truth, and `exhaustive_oracle`
//! computes exact bootstrap moments on tiny instances by enumerating every
//! equally likely ordered index draw.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{multibootstrap, paired_bootstrap, unpaired_bootstrap, RngStream};
use crate::inference::percentile_ci;
use crate::metrics::per_seed_values;
use crate::model::{
    align_paired, Design, DesignSpec, LabelRow, MetricSpec, PredictionSet, RunKey,
};
use crate::{Error, Result};

/// Generative ground truth for calibration runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub true_theta: f64,
    pub true_delta: f64,
    pub seed_effect_sd: f64,
    pub example_effect_sd: f64,
    pub noise_sd: f64,
    /// Correlation of the per-seed effects between the two arms.
    pub arm_correlation: f64,
    pub n_x: usize,
    pub n_s: usize,
    pub n_finetune: usize,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            true_theta: 0.7,
            true_delta: 0.0,
            seed_effect_sd: 0.05,
            example_effect_sd: 0.1,
            noise_sd: 0.05,
            arm_correlation: 0.0,
            n_x: 500,
            n_s: 10,
            n_finetune: 1,
        }
    }
}

fn draw_normals(n: usize, sd: f64, rng: &mut impl Rng) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn label_rows(n_x: usize) -> Vec<LabelRow> {
    (0..n_x)
        .map(|i| LabelRow {
            example_id: format!("x{i:06}"),
            label: 0.0,
            group_id: None,
        })
        .collect()
}

fn run_keys(n_s: usize, n_finetune: usize) -> Vec<RunKey> {
    let mut runs = Vec::with_capacity(n_s * n_finetune);
    for j in 0..n_s {
        for k in 0..n_finetune {
            runs.push(RunKey::new(format!("s{j:04}"), format!("r{k:02}")));
        }
    }
    runs
}

fn assemble(
    sc: &SyntheticScenario,
    mean: f64,
    seed_effects: &[f64],
    example_effects: &[f64],
    rng: &mut impl Rng,
) -> PredictionSet {
    let n_runs = sc.n_s * sc.n_finetune;
    let mut values = Vec::with_capacity(sc.n_x * n_runs);
    let noise = Normal::new(0.0, sc.noise_sd.max(f64::MIN_POSITIVE)).unwrap();
    for i in 0..sc.n_x {
        for j in 0..sc.n_s {
            for _ in 0..sc.n_finetune {
                let eps = if sc.noise_sd == 0.0 {
                    0.0
                } else {
                    noise.sample(rng)
                };
                values.push(mean + seed_effects[j] + example_effects[i] + eps);
            }
        }
    }
    PredictionSet::from_matrix(label_rows(sc.n_x), run_keys(sc.n_s, sc.n_finetune), values)
        .expect("generated matrix is complete and finite")
}

/// Draws one synthetic single-arm data set with population mean `true_theta`,
/// scored by `mean_of_scores`.
pub fn generate(sc: &SyntheticScenario, stream: RngStream) -> PredictionSet {
    let mut rng = stream.rng();
    let seed_effects = draw_normals(sc.n_s, sc.seed_effect_sd, &mut rng);
    let example_effects = draw_normals(sc.n_x, sc.example_effect_sd, &mut rng);
    assemble(sc, sc.true_theta, &seed_effects, &example_effects, &mut rng)
}

/// Draws a two-arm data set on a shared test set. The arms share example
/// effects and seed identifiers; their per-seed effects are correlated at
/// `arm_correlation`, and the second arm's mean is `true_theta + true_delta`.
pub fn generate_pair(sc: &SyntheticScenario, stream: RngStream) -> (PredictionSet, PredictionSet) {
    let mut rng = stream.rng();
    let rho = sc.arm_correlation;
    let b1 = draw_normals(sc.n_s, sc.seed_effect_sd, &mut rng);
    let indep = draw_normals(sc.n_s, sc.seed_effect_sd, &mut rng);
    let b2: Vec<f64> = b1
        .iter()
        .zip(&indep)
        .map(|(x, y)| rho * x + (1.0 - rho * rho).sqrt() * y)
        .collect();
    let example_effects = draw_normals(sc.n_x, sc.example_effect_sd, &mut rng);
    let base = assemble(sc, sc.true_theta, &b1, &example_effects, &mut rng);
    let intervention = assemble(
        sc,
        sc.true_theta + sc.true_delta,
        &b2,
        &example_effects,
        &mut rng,
    );
    (base, intervention)
}

/// Outcome of a coverage study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub nominal_level: f64,
    pub empirical_coverage: f64,
    pub n_replications: usize,
    pub mc_stderr: f64,
    /// Mean bootstrap SD of the point estimate divided by the SD of the
    /// point estimate across replications.
    pub variance_ratio: f64,
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn rep_master_seed(master_seed: u64, r: usize) -> u64 {
    master_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(r as u64 + 1)
}

/// Repeatedly generates fresh data, runs the designated bootstrap, and
/// records whether the nominal-level CI covers the true parameter
/// (`true_theta` for single designs, `true_delta` for comparisons).
pub fn coverage_study(
    sc: &SyntheticScenario,
    design: &DesignSpec,
    n_replications: usize,
    master_seed: u64,
) -> Result<CalibrationResult> {
    if n_replications < 50 {
        return Err(Error::TooFewReplications(n_replications));
    }
    design.validate()?;
    let metric = MetricSpec::new(crate::model::MetricKind::MeanOfScores);
    let truth = match design.design {
        Design::Single | Design::FixedBaseline => sc.true_theta,
        Design::Paired | Design::Unpaired => sc.true_delta,
    };
    let per_rep: Vec<(bool, f64, f64)> = (0..n_replications)
        .into_par_iter()
        .map(|r| -> Result<(bool, f64, f64)> {
            let mut rep_design = design.clone();
            rep_design.master_seed = rep_master_seed(master_seed, r);
            let data_stream = RngStream::new(master_seed, r as u64);
            let (samples, point) = match design.design {
                Design::Single | Design::FixedBaseline => {
                    let preds = generate(sc, data_stream);
                    let point = crate::engine::point_estimate(&preds, metric)?;
                    (multibootstrap(&preds, metric, &rep_design)?, point)
                }
                Design::Paired => {
                    let (base, iv) = generate_pair(sc, data_stream);
                    let pair = align_paired(&base, &iv)?;
                    let point = crate::engine::point_estimate(&iv, metric)?
                        - crate::engine::point_estimate(&base, metric)?;
                    (paired_bootstrap(&pair, metric, &rep_design)?.delta, point)
                }
                Design::Unpaired => {
                    let (base, iv) = generate_pair(sc, data_stream);
                    let point = crate::engine::point_estimate(&iv, metric)?
                        - crate::engine::point_estimate(&base, metric)?;
                    (
                        unpaired_bootstrap(&base, &iv, metric, &rep_design)?.delta,
                        point,
                    )
                }
            };
            let (lo, hi) = percentile_ci(&samples, design.ci_level)?;
            let covered = lo <= truth && truth <= hi;
            let boot_sd = if samples.len() > 1 {
                sample_sd(&samples)
            } else {
                0.0
            };
            Ok((covered, point, boot_sd))
        })
        .collect::<Result<_>>()?;

    let n = n_replications as f64;
    let coverage = per_rep.iter().filter(|(c, _, _)| *c).count() as f64 / n;
    let points: Vec<f64> = per_rep.iter().map(|(_, p, _)| *p).collect();
    let mean_boot_sd = per_rep.iter().map(|(_, _, s)| s).sum::<f64>() / n;
    let across_sd = sample_sd(&points);
    Ok(CalibrationResult {
        nominal_level: design.ci_level,
        empirical_coverage: coverage,
        n_replications,
        mc_stderr: (coverage * (1.0 - coverage) / n).sqrt(),
        variance_ratio: if across_sd > 0.0 {
            mean_boot_sd / across_sd
        } else {
            f64::INFINITY
        },
    })
}

fn next_seq(seq: &mut [usize], base: usize) -> bool {
    for d in seq.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exact first two moments of the bootstrap statistic by enumerating all
/// `n_x^n_x * n_s^n_s` equally likely ordered index draws (axis = both).
pub fn exhaustive_oracle(preds: &PredictionSet, metric: MetricSpec) -> Result<(f64, f64)> {
    let n_x = preds.n_x();
    let n_s = preds.n_s();
    let total = (n_x as u128)
        .checked_pow(n_x as u32)
        .and_then(|a| (n_s as u128).checked_pow(n_s as u32).map(|b| (a, b)))
        .and_then(|(a, b)| a.checked_mul(b))
        .ok_or(Error::InstanceTooLarge(u128::MAX))?;
    if total > 10_000_000 {
        return Err(Error::InstanceTooLarge(total));
    }
    crate::metrics::validate_compatible(preds, metric)?;

    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut ex_seq = vec![0usize; n_x];
    loop {
        let vals = per_seed_values(preds, metric, &ex_seq)?;
        let mut seed_seq = vec![0usize; n_s];
        loop {
            let theta: f64 =
                seed_seq.iter().map(|&j| vals[j].1).sum::<f64>() / n_s as f64;
            sum += theta;
            sumsq += theta * theta;
            if !next_seq(&mut seed_seq, n_s) {
                break;
            }
        }
        if !next_seq(&mut ex_seq, n_x) {
            break;
        }
    }
    let n = total as f64;
    let mean = sum / n;
    Ok((mean, (sumsq / n - mean * mean).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MetricKind;

    fn mos() -> MetricSpec {
        MetricSpec::new(MetricKind::MeanOfScores)
    }

    #[test]
    fn degenerate_generator_is_constant() {
        let sc = SyntheticScenario {
            true_theta: 0.42,
            seed_effect_sd: 0.0,
            example_effect_sd: 0.0,
            noise_sd: 0.0,
            n_x: 5,
            n_s: 3,
            n_finetune: 2,
            ..Default::default()
        };
        let preds = generate(&sc, RngStream::new(0, 0));
        for i in 0..preds.n_x() {
            for j in 0..preds.n_runs() {
                assert_eq!(preds.value(i, j), 0.42);
            }
        }
        let theta = crate::engine::point_estimate(&preds, mos()).unwrap();
        assert!((theta - 0.42).abs() < 1e-12);
    }

    #[test]
    fn perfect_pairing_cancels_seed_effects() {
        let sc = SyntheticScenario {
            true_theta: 0.5,
            true_delta: 0.1,
            arm_correlation: 1.0,
            seed_effect_sd: 0.2,
            example_effect_sd: 0.1,
            noise_sd: 0.0,
            n_x: 20,
            n_s: 4,
            n_finetune: 1,
            ..Default::default()
        };
        let (base, iv) = generate_pair(&sc, RngStream::new(7, 0));
        let identity: Vec<usize> = (0..20).collect();
        let vb = per_seed_values(&base, mos(), &identity).unwrap();
        let vi = per_seed_values(&iv, mos(), &identity).unwrap();
        for (b, i) in vb.iter().zip(&vi) {
            assert!((i.1 - b.1 - 0.1).abs() < 1e-10);
        }
    }

    #[test]
    fn seed_effect_sd_recovered_at_large_n() {
        let sc = SyntheticScenario {
            true_theta: 0.0,
            seed_effect_sd: 0.1,
            example_effect_sd: 0.0,
            noise_sd: 0.0,
            n_x: 2,
            n_s: 10_000,
            n_finetune: 1,
            ..Default::default()
        };
        let preds = generate(&sc, RngStream::new(1, 0));
        let identity: Vec<usize> = (0..2).collect();
        let vals = per_seed_values(&preds, mos(), &identity).unwrap();
        let xs: Vec<f64> = vals.iter().map(|(_, v)| *v).collect();
        let sd = sample_sd(&xs);
        assert!(
            (sd - 0.1).abs() < 0.005,
            "per-seed sd {sd} not within 5% of 0.1"
        );
    }

    #[test]
    fn oracle_trivial_instance() {
        let preds = PredictionSet::from_matrix(
            vec![LabelRow {
                example_id: "e0".into(),
                label: 0.0,
                group_id: None,
            }],
            vec![RunKey::new("s", "r")],
            vec![0.8],
        )
        .unwrap();
        let (mean, var) = exhaustive_oracle(&preds, mos()).unwrap();
        assert_eq!(mean, 0.8);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn oracle_three_by_two_accuracy() {
        // Labels [1,0,1]; seed A predicts [1,0,0], seed B [1,1,1].
        let labels: Vec<LabelRow> = [1.0, 0.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, l)| LabelRow {
                example_id: format!("e{i}"),
                label: *l,
                group_id: None,
            })
            .collect();
        let runs = vec![RunKey::new("A", "r"), RunKey::new("B", "r")];
        let values = vec![1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let preds = PredictionSet::from_matrix(labels, runs, values).unwrap();
        let (mean, _) =
            exhaustive_oracle(&preds, MetricSpec::new(MetricKind::Accuracy)).unwrap();
        assert!((mean - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let sc = SyntheticScenario {
            n_x: 12,
            n_s: 3,
            seed_effect_sd: 0.0,
            example_effect_sd: 0.0,
            noise_sd: 0.0,
            n_finetune: 1,
            ..Default::default()
        };
        let preds = generate(&sc, RngStream::new(0, 0));
        assert!(matches!(
            exhaustive_oracle(&preds, mos()),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn oracle_matches_engine_monte_carlo() {
        let sc = SyntheticScenario {
            true_theta: 0.5,
            seed_effect_sd: 0.1,
            example_effect_sd: 0.2,
            noise_sd: 0.05,
            n_x: 4,
            n_s: 3,
            n_finetune: 1,
            ..Default::default()
        };
        let preds = generate(&sc, RngStream::new(21, 0));
        let (exact_mean, exact_var) = exhaustive_oracle(&preds, mos()).unwrap();
        let design = DesignSpec::new(Design::Single)
            .with_nboot(100_000)
            .with_master_seed(22);
        let samples = multibootstrap(&preds, mos(), &design).unwrap();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se_mean = (exact_var / n).sqrt();
        assert!((mean - exact_mean).abs() < 3.0 * se_mean);
        // Normal-approximation standard error for a sample variance.
        let se_var = exact_var * (2.0 / (n - 1.0)).sqrt();
        assert!((var - exact_var).abs() < 4.0 * se_var);
    }

    #[test]
    fn zero_variance_scenario_has_full_coverage() {
        let sc = SyntheticScenario {
            true_theta: 0.9,
            seed_effect_sd: 0.0,
            example_effect_sd: 0.0,
            noise_sd: 0.0,
            n_x: 10,
            n_s: 3,
            n_finetune: 1,
            ..Default::default()
        };
        let design = DesignSpec::new(Design::Single).with_nboot(50);
        let result = coverage_study(&sc, &design, 50, 0).unwrap();
        assert_eq!(result.empirical_coverage, 1.0);
    }
}
