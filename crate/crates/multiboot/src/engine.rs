//! The joint seed/example resampler.
//!
//! Each bootstrap iteration gets its own counter-keyed RNG substream, so
//! iterations are independent pure computations: running them serially or in
//! parallel produces bit-identical sample vectors, and the whole output is a
//! deterministic function of the inputs and the master seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::metrics::{per_seed_values, validate_compatible};
use crate::model::{Axis, Design, DesignSpec, MetricSpec, PairedView, PredictionSet};
use crate::{Error, Result};

/// A reproducible random stream: identical `(master_seed, stream_id)` yields
/// an identical draw sequence; distinct stream ids are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Index draws for one bootstrap iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleIndices {
    pub example_indices: Vec<usize>,
    pub seed_indices: Vec<usize>,
}

fn draw_with_replacement(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..n)).collect()
}

/// Draws resample indices for one iteration: `n_x` example indices and `n_s`
/// seed indices with replacement, with the inactive axis fixed to identity.
pub fn draw_resample(n_x: usize, n_s: usize, axis: Axis, stream: RngStream) -> ResampleIndices {
    let mut rng = stream.rng();
    draw_resample_with(n_x, n_s, axis, &mut rng)
}

fn draw_resample_with(n_x: usize, n_s: usize, axis: Axis, rng: &mut ChaCha8Rng) -> ResampleIndices {
    // Examples are always drawn before seeds so that the stream layout is
    // identical across designs.
    let example_indices = match axis {
        Axis::Both | Axis::ExamplesOnly => draw_with_replacement(n_x, n_x, rng),
        Axis::SeedsOnly => (0..n_x).collect(),
    };
    let seed_indices = match axis {
        Axis::Both | Axis::SeedsOnly => draw_with_replacement(n_s, n_s, rng),
        Axis::ExamplesOnly => (0..n_s).collect(),
    };
    ResampleIndices {
        example_indices,
        seed_indices,
    }
}

/// Group-block example resample: draws G groups with replacement and
/// concatenates their member rows. The result length may differ from `n_x`.
pub fn grouped_example_indices(preds: &PredictionSet, stream: RngStream) -> Result<Vec<usize>> {
    let mut rng = stream.rng();
    grouped_example_indices_with(preds, &mut rng)
}

fn grouped_example_indices_with(preds: &PredictionSet, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let blocks = preds.group_blocks().ok_or(Error::NoGroups)?;
    let g = blocks.len();
    let mut out = Vec::new();
    for _ in 0..g {
        let b = rng.gen_range(0..g);
        out.extend_from_slice(&blocks[b].1);
    }
    Ok(out)
}

fn example_draw(
    preds: &PredictionSet,
    design: &DesignSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    match design.axis {
        Axis::SeedsOnly => Ok((0..preds.n_x()).collect()),
        Axis::Both | Axis::ExamplesOnly => {
            if design.use_groups {
                grouped_example_indices_with(preds, rng)
            } else {
                Ok(draw_with_replacement(preds.n_x(), preds.n_x(), rng))
            }
        }
    }
}

fn seed_draw(n_s: usize, axis: Axis, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match axis {
        Axis::Both | Axis::SeedsOnly => draw_with_replacement(n_s, n_s, rng),
        Axis::ExamplesOnly => (0..n_s).collect(),
    }
}

fn theta_star(
    preds: &PredictionSet,
    metric: MetricSpec,
    example_indices: &[usize],
    seed_indices: &[usize],
) -> Result<f64> {
    let vals = per_seed_values(preds, metric, example_indices)?;
    let sum: f64 = seed_indices.iter().map(|&j| vals[j].1).sum();
    Ok(sum / seed_indices.len() as f64)
}

fn wrap_iteration<T>(b: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::DegenerateDraw {
        iteration: b,
        source: Box::new(e),
    })
}

fn collect_parallel<F>(nboot: usize, body: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    (0..nboot).into_par_iter().map(body).collect()
}

/// The point estimate: mean over pretraining seeds of the per-seed metric,
/// fine-tuning runs averaged within each seed first.
pub fn point_estimate(preds: &PredictionSet, metric: MetricSpec) -> Result<f64> {
    validate_compatible(preds, metric)?;
    let identity: Vec<usize> = (0..preds.n_x()).collect();
    let vals = per_seed_values(preds, metric, &identity)?;
    Ok(vals.iter().map(|(_, v)| v).sum::<f64>() / vals.len() as f64)
}

/// One single-arm bootstrap draw, keyed by iteration index.
pub fn bootstrap_iteration(
    preds: &PredictionSet,
    metric: MetricSpec,
    design: &DesignSpec,
    b: usize,
) -> Result<f64> {
    let mut rng = RngStream::new(design.master_seed, b as u64).rng();
    let ex = wrap_iteration(b, example_draw(preds, design, &mut rng))?;
    let seeds = seed_draw(preds.n_s(), design.axis, &mut rng);
    wrap_iteration(b, theta_star(preds, metric, &ex, &seeds))
}

/// Generates `design.nboot` bootstrap samples of a single model's
/// performance.
pub fn multibootstrap(
    preds: &PredictionSet,
    metric: MetricSpec,
    design: &DesignSpec,
) -> Result<Vec<f64>> {
    if !matches!(design.design, Design::Single | Design::FixedBaseline) {
        return Err(Error::WrongDesign {
            got: "paired/unpaired",
            expected: "single or fixed_baseline",
        });
    }
    design.validate()?;
    validate_compatible(preds, metric)?;
    collect_parallel(design.nboot, |b| bootstrap_iteration(preds, metric, design, b))
}

/// Sample vectors from a comparison: the difference and both arms, with
/// sample `b` of each vector coming from the same iteration.
#[derive(Debug, Clone)]
pub struct ComparisonSamples {
    pub delta: Vec<f64>,
    pub base: Vec<f64>,
    pub intervention: Vec<f64>,
}

fn split_triples(triples: Vec<(f64, f64, f64)>) -> ComparisonSamples {
    let mut out = ComparisonSamples {
        delta: Vec::with_capacity(triples.len()),
        base: Vec::with_capacity(triples.len()),
        intervention: Vec::with_capacity(triples.len()),
    };
    for (d, f, fp) in triples {
        out.delta.push(d);
        out.base.push(f);
        out.intervention.push(fp);
    }
    out
}

/// One paired draw: a single index draw shared by both arms.
pub fn paired_iteration(
    pair: &PairedView,
    metric: MetricSpec,
    design: &DesignSpec,
    b: usize,
) -> Result<(f64, f64, f64)> {
    let mut rng = RngStream::new(design.master_seed, b as u64).rng();
    let ex = wrap_iteration(b, example_draw(pair.base, design, &mut rng))?;
    let seeds = seed_draw(pair.base.n_s(), design.axis, &mut rng);
    let ex_iv: Vec<usize> = ex.iter().map(|&i| pair.intervention_rows[i]).collect();
    let t_base = wrap_iteration(b, theta_star(pair.base, metric, &ex, &seeds))?;
    let t_iv = wrap_iteration(b, theta_star(pair.intervention, metric, &ex_iv, &seeds))?;
    Ok((t_iv - t_base, t_base, t_iv))
}

/// Paired comparison: both arms share every seed and example draw, so the
/// difference distribution absorbs the seed correlation between arms.
pub fn paired_bootstrap(
    pair: &PairedView,
    metric: MetricSpec,
    design: &DesignSpec,
) -> Result<ComparisonSamples> {
    if design.design != Design::Paired {
        return Err(Error::WrongDesign {
            got: "non-paired",
            expected: "paired",
        });
    }
    design.validate()?;
    validate_compatible(pair.base, metric)?;
    validate_compatible(pair.intervention, metric)?;
    let triples: Vec<(f64, f64, f64)> = (0..design.nboot)
        .into_par_iter()
        .map(|b| paired_iteration(pair, metric, design, b))
        .collect::<Result<_>>()?;
    Ok(split_triples(triples))
}

/// One unpaired draw: shared example indices, independent per-arm seed draws.
pub fn unpaired_iteration(
    base: &PredictionSet,
    intervention: &PredictionSet,
    intervention_rows: &[usize],
    metric: MetricSpec,
    design: &DesignSpec,
    b: usize,
) -> Result<(f64, f64, f64)> {
    let mut rng = RngStream::new(design.master_seed, b as u64).rng();
    let ex = wrap_iteration(b, example_draw(base, design, &mut rng))?;
    let seeds_base = seed_draw(base.n_s(), design.axis, &mut rng);
    let seeds_iv = seed_draw(intervention.n_s(), design.axis, &mut rng);
    let ex_iv: Vec<usize> = ex.iter().map(|&i| intervention_rows[i]).collect();
    let t_base = wrap_iteration(b, theta_star(base, metric, &ex, &seeds_base))?;
    let t_iv = wrap_iteration(b, theta_star(intervention, metric, &ex_iv, &seeds_iv))?;
    Ok((t_iv - t_base, t_base, t_iv))
}

/// Unpaired comparison: arms share the test set (and its example draws) but
/// resample their own seed sets independently.
pub fn unpaired_bootstrap(
    base: &PredictionSet,
    intervention: &PredictionSet,
    metric: MetricSpec,
    design: &DesignSpec,
) -> Result<ComparisonSamples> {
    if design.design != Design::Unpaired {
        return Err(Error::WrongDesign {
            got: "non-unpaired",
            expected: "unpaired",
        });
    }
    design.validate()?;
    validate_compatible(base, metric)?;
    validate_compatible(intervention, metric)?;
    let rows = crate::model::align_examples(base, intervention)?;
    let triples: Vec<(f64, f64, f64)> = (0..design.nboot)
        .into_par_iter()
        .map(|b| unpaired_iteration(base, intervention, &rows, metric, design, b))
        .collect::<Result<_>>()?;
    Ok(split_triples(triples))
}
