//! Immutable data model: predictions, labels, seed/run structure, and
//! analysis configuration.
//!
//! A [`PredictionSet`] is a dense `n_x x n_runs` matrix of per-example values
//! together with labels and the nesting of fine-tuning runs under pretraining
//! seeds. Construction normalizes ordering (examples in label order, runs
//! sorted by seed then run id) so that permuted inputs produce identical
//! matrices, and everything is immutable afterwards.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifies one fine-tuning run of one pretraining seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub pretrain_seed: String,
    pub finetune_run: String,
}

impl RunKey {
    pub fn new(pretrain_seed: impl Into<String>, finetune_run: impl Into<String>) -> Self {
        Self {
            pretrain_seed: pretrain_seed.into(),
            finetune_run: finetune_run.into(),
        }
    }
}

/// Columns of the value matrix belonging to one pretraining seed.
#[derive(Debug, Clone)]
pub struct SeedGroup {
    pub seed: String,
    /// Column indices of this seed's fine-tuning runs.
    pub run_cols: Vec<usize>,
}

/// One input cell: the value of run (`pretrain_seed`, `finetune_run`) on
/// `example_id`.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub example_id: String,
    pub pretrain_seed: String,
    pub finetune_run: String,
    pub value: f64,
}

/// One labeled example, optionally assigned to a resampling group.
#[derive(Debug, Clone)]
pub struct LabelRow {
    pub example_id: String,
    pub label: f64,
    pub group_id: Option<String>,
}

/// Dense, complete prediction matrix over examples and runs.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    example_ids: Vec<String>,
    labels: Vec<f64>,
    group_ids: Option<Vec<String>>,
    /// Group id -> member example rows, in first-appearance order of groups.
    group_blocks: Option<Vec<(String, Vec<usize>)>>,
    runs: Vec<RunKey>,
    seed_groups: Vec<SeedGroup>,
    /// Row-major `n_x x runs.len()`.
    values: Vec<f64>,
}

impl PredictionSet {
    pub fn n_x(&self) -> usize {
        self.example_ids.len()
    }

    /// Number of distinct pretraining seeds.
    pub fn n_s(&self) -> usize {
        self.seed_groups.len()
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn group_ids(&self) -> Option<&[String]> {
        self.group_ids.as_deref()
    }

    /// Group blocks in first-appearance order, if group ids were provided.
    pub fn group_blocks(&self) -> Option<&[(String, Vec<usize>)]> {
        self.group_blocks.as_deref()
    }

    pub fn runs(&self) -> &[RunKey] {
        &self.runs
    }

    pub fn seed_groups(&self) -> &[SeedGroup] {
        &self.seed_groups
    }

    pub fn seed_ids(&self) -> impl Iterator<Item = &str> {
        self.seed_groups.iter().map(|g| g.seed.as_str())
    }

    #[inline]
    pub fn value(&self, example: usize, run_col: usize) -> f64 {
        self.values[example * self.runs.len() + run_col]
    }

    /// The full column of run `run_col`, in example order.
    pub fn column(&self, run_col: usize) -> Vec<f64> {
        (0..self.n_x()).map(|i| self.value(i, run_col)).collect()
    }

    /// Row index of `example_id`, if present.
    pub fn example_row(&self, example_id: &str) -> Option<usize> {
        self.example_ids.iter().position(|e| e == example_id)
    }
}

impl PredictionSet {
    /// Builds a set directly from an already-normalized matrix. `runs` must
    /// be sorted by (pretrain_seed, finetune_run) and `values` row-major
    /// `labels.len() x runs.len()`.
    pub fn from_matrix(labels: Vec<LabelRow>, runs: Vec<RunKey>, values: Vec<f64>) -> Result<Self> {
        if values.len() != labels.len() * runs.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: labels.len() * runs.len(),
            });
        }
        for w in runs.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::DuplicateCell {
                    example: "<from_matrix>".into(),
                    seed: w[1].pretrain_seed.clone(),
                    run: w[1].finetune_run.clone(),
                });
            }
        }
        for (cell, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let (i, j) = (cell / runs.len(), cell % runs.len());
                return Err(Error::NonFiniteValue {
                    example: labels[i].example_id.clone(),
                    seed: runs[j].pretrain_seed.clone(),
                    run: runs[j].finetune_run.clone(),
                });
            }
        }

        let with_groups = labels.iter().any(|l| l.group_id.is_some());
        let mut example_ids = Vec::with_capacity(labels.len());
        let mut label_vals = Vec::with_capacity(labels.len());
        let mut group_ids = Vec::new();
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(labels.len());
        for l in &labels {
            if !l.label.is_finite() {
                return Err(Error::NonFiniteLabel(l.example_id.clone()));
            }
            if with_groups {
                match &l.group_id {
                    Some(g) => group_ids.push(g.clone()),
                    None => return Err(Error::InconsistentGroups(l.example_id.clone())),
                }
            }
            example_ids.push(l.example_id.clone());
            label_vals.push(l.label);
        }
        for e in &example_ids {
            if seen.insert(e, ()).is_some() {
                return Err(Error::DuplicateExample(e.clone()));
            }
        }
        drop(seen);

        let mut seed_groups: Vec<SeedGroup> = Vec::new();
        for (j, run) in runs.iter().enumerate() {
            match seed_groups.last_mut() {
                Some(g) if g.seed == run.pretrain_seed => g.run_cols.push(j),
                _ => seed_groups.push(SeedGroup {
                    seed: run.pretrain_seed.clone(),
                    run_cols: vec![j],
                }),
            }
        }
        let group_blocks = if with_groups {
            let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
            let mut block_of: HashMap<String, usize> = HashMap::new();
            for (i, g) in group_ids.iter().enumerate() {
                match block_of.get(g.as_str()) {
                    Some(&b) => blocks[b].1.push(i),
                    None => {
                        block_of.insert(g.clone(), blocks.len());
                        blocks.push((g.clone(), vec![i]));
                    }
                }
            }
            Some(blocks)
        } else {
            None
        };

        Ok(PredictionSet {
            example_ids,
            labels: label_vals,
            group_ids: with_groups.then_some(group_ids),
            group_blocks,
            runs,
            seed_groups,
            values,
        })
    }
}

/// Assembles a [`PredictionSet`] from long-format rows and a label table.
///
/// Examples are ordered as they appear in `labels`; runs are sorted by
/// (pretrain_seed, finetune_run) so the result does not depend on row order.
/// Every example x run cell must be present exactly once.
pub fn build_prediction_set(rows: &[PredictionRow], labels: &[LabelRow]) -> Result<PredictionSet> {
    let mut example_ids = Vec::with_capacity(labels.len());
    let mut label_vals = Vec::with_capacity(labels.len());
    let mut row_of: HashMap<&str, usize> = HashMap::with_capacity(labels.len());
    let with_groups = labels.iter().any(|l| l.group_id.is_some());
    let mut group_ids = Vec::new();
    for l in labels {
        if row_of.insert(&l.example_id, example_ids.len()).is_some() {
            return Err(Error::DuplicateExample(l.example_id.clone()));
        }
        if !l.label.is_finite() {
            return Err(Error::NonFiniteLabel(l.example_id.clone()));
        }
        if with_groups {
            match &l.group_id {
                Some(g) => group_ids.push(g.clone()),
                None => return Err(Error::InconsistentGroups(l.example_id.clone())),
            }
        }
        example_ids.push(l.example_id.clone());
        label_vals.push(l.label);
    }

    let mut runs: Vec<RunKey> = rows
        .iter()
        .map(|r| RunKey::new(r.pretrain_seed.clone(), r.finetune_run.clone()))
        .collect();
    runs.sort();
    runs.dedup();
    let col_of: HashMap<&RunKey, usize> = runs.iter().zip(0..).collect();

    let n_x = example_ids.len();
    let n_runs = runs.len();
    let mut values = vec![f64::NAN; n_x * n_runs];
    let mut filled = vec![false; n_x * n_runs];
    for r in rows {
        let i = *row_of
            .get(r.example_id.as_str())
            .ok_or_else(|| Error::UnknownExample(r.example_id.clone()))?;
        let key = RunKey::new(r.pretrain_seed.clone(), r.finetune_run.clone());
        let j = col_of[&key];
        let cell = i * n_runs + j;
        if filled[cell] {
            return Err(Error::DuplicateCell {
                example: r.example_id.clone(),
                seed: r.pretrain_seed.clone(),
                run: r.finetune_run.clone(),
            });
        }
        if !r.value.is_finite() {
            return Err(Error::NonFiniteValue {
                example: r.example_id.clone(),
                seed: r.pretrain_seed.clone(),
                run: r.finetune_run.clone(),
            });
        }
        values[cell] = r.value;
        filled[cell] = true;
    }
    if let Some(cell) = filled.iter().position(|f| !f) {
        let (i, j) = (cell / n_runs, cell % n_runs);
        return Err(Error::MissingCell {
            example: example_ids[i].clone(),
            seed: runs[j].pretrain_seed.clone(),
            run: runs[j].finetune_run.clone(),
        });
    }

    // Runs are sorted, so each seed's columns are contiguous.
    let mut seed_groups: Vec<SeedGroup> = Vec::new();
    for (j, run) in runs.iter().enumerate() {
        match seed_groups.last_mut() {
            Some(g) if g.seed == run.pretrain_seed => g.run_cols.push(j),
            _ => seed_groups.push(SeedGroup {
                seed: run.pretrain_seed.clone(),
                run_cols: vec![j],
            }),
        }
    }

    let group_blocks = if with_groups {
        let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
        let mut block_of: HashMap<&str, usize> = HashMap::new();
        for (i, g) in group_ids.iter().enumerate() {
            match block_of.get(g.as_str()) {
                Some(&b) => blocks[b].1.push(i),
                None => {
                    block_of.insert(g, blocks.len());
                    blocks.push((g.clone(), vec![i]));
                }
            }
        }
        Some(blocks)
    } else {
        None
    };

    Ok(PredictionSet {
        example_ids,
        labels: label_vals,
        group_ids: with_groups.then_some(group_ids),
        group_blocks,
        runs,
        seed_groups,
        values,
    })
}

/// Two prediction sets aligned on examples, labels, and pretraining seeds.
///
/// Seed groups are aligned positionally: construction guarantees both sets
/// carry the same sorted seed list, so seed index `k` refers to the same
/// pretraining seed in either arm.
#[derive(Debug)]
pub struct PairedView<'a> {
    pub base: &'a PredictionSet,
    pub intervention: &'a PredictionSet,
    /// Row in `intervention` holding the example of row `i` in `base`.
    pub intervention_rows: Vec<usize>,
}

/// Aligns a base/intervention pair sharing the test set and the seed set.
pub fn align_paired<'a>(
    base: &'a PredictionSet,
    intervention: &'a PredictionSet,
) -> Result<PairedView<'a>> {
    let intervention_rows = align_examples(base, intervention)?;
    let base_seeds: Vec<&str> = base.seed_ids().collect();
    let iv_seeds: Vec<&str> = intervention.seed_ids().collect();
    for s in &base_seeds {
        if !iv_seeds.contains(s) {
            return Err(Error::SeedMismatch(s.to_string()));
        }
    }
    for s in &iv_seeds {
        if !base_seeds.contains(s) {
            return Err(Error::SeedMismatch(s.to_string()));
        }
    }
    Ok(PairedView {
        base,
        intervention,
        intervention_rows,
    })
}

/// Checks that both sets hold the same examples with equal labels and
/// returns, for each base row, the matching intervention row.
pub fn align_examples(base: &PredictionSet, other: &PredictionSet) -> Result<Vec<usize>> {
    if base.n_x() != other.n_x() {
        if let Some(e) = other
            .example_ids()
            .iter()
            .find(|e| base.example_row(e).is_none())
        {
            return Err(Error::ExampleMismatch(e.clone()));
        }
    }
    let mut rows = Vec::with_capacity(base.n_x());
    for (i, e) in base.example_ids().iter().enumerate() {
        let j = other
            .example_row(e)
            .ok_or_else(|| Error::ExampleMismatch(e.clone()))?;
        if base.labels()[i] != other.labels()[j] {
            return Err(Error::LabelMismatch(e.clone()));
        }
        rows.push(j);
    }
    Ok(rows)
}

/// Which performance functional to compute from a prediction column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Fraction of exact prediction/label matches; labels must be class indices.
    Accuracy,
    /// Sample Pearson correlation between predictions and labels.
    Pearson,
    /// Arithmetic mean of the prediction column; labels are ignored, so
    /// precomputed per-example scores can be fed through this.
    MeanOfScores,
}

/// Reporting metadata only; no operation branches on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub direction: Direction,
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            direction: Direction::HigherIsBetter,
        }
    }
}

/// Comparison design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Single,
    Paired,
    Unpaired,
    FixedBaseline,
}

/// Which of the two resampling axes are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Both,
    SeedsOnly,
    ExamplesOnly,
}

/// Full analysis configuration: design, axis, draw count, CI level, RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: Design,
    pub axis: Axis,
    pub nboot: usize,
    pub ci_level: f64,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_value: Option<f64>,
    /// Resample groups as atomic blocks instead of individual examples.
    #[serde(default)]
    pub use_groups: bool,
}

impl DesignSpec {
    pub fn new(design: Design) -> Self {
        Self {
            design,
            axis: Axis::Both,
            nboot: 1000,
            ci_level: 0.95,
            master_seed: 0,
            baseline_value: None,
            use_groups: false,
        }
    }

    pub fn with_nboot(mut self, nboot: usize) -> Self {
        self.nboot = nboot;
        self
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_master_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nboot == 0 {
            return Err(Error::EmptySamples);
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidLevel(self.ci_level));
        }
        if self.design == Design::FixedBaseline && self.baseline_value.is_none() {
            return Err(Error::MissingBaseline);
        }
        Ok(())
    }
}

/// Bootstrap output for one analysis: the draws plus derived summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point_estimate: f64,
    pub samples: Vec<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    /// (point, samples) per arm, for comparison designs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_arm: Option<(ArmResult, ArmResult)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmResult {
    pub point_estimate: f64,
    pub samples: Vec<f64>,
}
