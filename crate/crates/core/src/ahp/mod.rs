//! Analytic hierarchy process scoring.
//!
//! Quantitative criteria are scored by direct normalization of their
//! mid-range vectors. Qualitative criteria go through reciprocal pairwise
//! matrices built from consensus judgments; priorities come from the
//! row averages of the column-normalized matrix. Per-criterion columns are
//! then combined into total normalized scores (TNS), lower being better.

mod eigen;
mod matrix;
mod normalize;
mod score;

pub use eigen::{principal_eigen, EigenEstimate};
pub use matrix::{
    consistency, lambda_max, matrix_from_ratings, priority_from_matrix, random_index,
    ConsistencyReport, Judgment, PairwiseMatrix, PriorityVector,
};
pub use normalize::{normalize_direct, CellFlag, ImputationPolicy, Injection, ScoreColumn};
pub use score::{
    aggregate_tns, assemble_score_matrix, equal_weights, ScoreMatrix, TnsResult,
    STRICT_COLUMN_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AhpError {
    #[error("pairwise matrix needs at least 2 alternatives, got {0}")]
    TooFewAlternatives(usize),
    #[error("matrix shape does not match {0} labels")]
    Shape(usize),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("entry ({row}, {col}) = {value} is not a positive finite number")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("diagonal entry {0} is not 1")]
    Diagonal(usize),
    #[error("entries ({row}, {col}) and ({col}, {row}) are not reciprocal")]
    NotReciprocal { row: usize, col: usize },
    #[error("rating value {0} outside the 1..5 scale")]
    ValueOutOfScale(u8),
    #[error("unknown alternative `{0}`")]
    UnknownAlternative(String),
    #[error("pair ({0}, {1}) compares an alternative with itself")]
    SelfPair(String, String),
    #[error("`worse` must name one of the pair members, got `{0}`")]
    BadOrientation(String),
    #[error("pair ({0}, {1}) rated more than once")]
    DuplicatePair(String, String),
    #[error("pair ({0}, {1}) has no rating")]
    MissingPair(String, String),
    #[error("consistency ratio is tabulated only up to order 10, got {0}")]
    UnsupportedOrder(usize),
    #[error("criterion {0}: fewer than two technologies have values")]
    TooFewValues(u8),
    #[error("criterion {0}: every value is zero")]
    AllZero(u8),
    #[error("criterion {criterion}: negative or non-finite value for `{technology}`")]
    InvalidValue { criterion: u8, technology: String },
    #[error("criterion {criterion}: no injected value for missing `{technology}`")]
    MissingInjection { criterion: u8, technology: String },
    #[error("criterion {criterion}: injected share {share} for `{technology}` is outside [0, 1)")]
    InvalidShare {
        criterion: u8,
        technology: String,
        share: f64,
    },
    #[error("criterion {0}: injected shares sum to 1 or more")]
    SharesExhausted(u8),
    #[error("priority weights must be non-negative and sum to a positive value")]
    InvalidPriorities,
    #[error("columns cover different technology lists")]
    TechnologyMismatch,
    #[error("duplicate criterion {0}")]
    DuplicateCriterion(u8),
    #[error("criterion {0} is not part of the study")]
    UnknownCriterion(u8),
    #[error("criterion {0} has no column")]
    MissingCriterion(u8),
    #[error("criterion {criterion}: column sums to {sum}")]
    ColumnSum { criterion: u8, sum: f64 },
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("weight {0} is negative or non-finite")]
    NegativeWeight(f64),
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
}
