//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing cell: example `{example}` has no value for run ({seed}, {run})")]
    MissingCell {
        example: String,
        seed: String,
        run: String,
    },

    #[error("duplicate cell: example `{example}` appears more than once for run ({seed}, {run})")]
    DuplicateCell {
        example: String,
        seed: String,
        run: String,
    },

    #[error("duplicate example `{0}` in labels")]
    DuplicateExample(String),

    #[error("unknown example `{0}` in prediction rows (not present in labels)")]
    UnknownExample(String),

    #[error("non-finite value for example `{example}`, run ({seed}, {run})")]
    NonFiniteValue {
        example: String,
        seed: String,
        run: String,
    },

    #[error("non-finite label for example `{0}`")]
    NonFiniteLabel(String),

    #[error("group ids must cover every example or none; example `{0}` breaks this")]
    InconsistentGroups(String),

    #[error("example `{0}` is not present in both prediction sets")]
    ExampleMismatch(String),

    #[error("label mismatch for example `{0}` between the two prediction sets")]
    LabelMismatch(String),

    #[error("pretraining seed `{0}` is not present in both prediction sets")]
    SeedMismatch(String),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("pearson correlation is undefined: an input has zero variance")]
    DegenerateVariance,

    #[error("pearson correlation requires at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("accuracy requires integer class labels; label for example `{0}` is not an integer")]
    NonIntegerLabel(String),

    #[error("example index {index} out of range (n_x = {n_x})")]
    IndexOutOfRange { index: usize, n_x: usize },

    #[error("no example indices selected")]
    EmptyIndices,

    #[error("prediction set carries no group ids")]
    NoGroups,

    #[error("insufficient runs: no {0}-seed pairs exist")]
    InsufficientRuns(String),

    #[error("empty sample vector")]
    EmptySamples,

    #[error("confidence level must lie strictly in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("instance too large for exhaustive enumeration ({0} outcomes)")]
    InstanceTooLarge(u128),

    #[error("metric failed in bootstrap iteration {iteration}: {source}")]
    DegenerateDraw {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("design `{got}` is not valid here, expected {expected}")]
    WrongDesign {
        got: &'static str,
        expected: &'static str,
    },

    #[error("fixed-baseline design requires a baseline value")]
    MissingBaseline,

    #[error("coverage study needs at least 50 replications, got {0}")]
    TooFewReplications(usize),
}
