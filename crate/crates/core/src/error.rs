use thiserror::Error;

use crate::panel::{Month, SeriesId};

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing value for {series} at {date}")]
    MissingData { series: SeriesId, date: Month },

    #[error("non-positive index level {value} for {series} at {date}")]
    NonPositiveLevel {
        series: SeriesId,
        date: Month,
        value: f64,
    },

    #[error("irregular time axis: {found} follows {previous}")]
    IrregularTimeAxis { previous: Month, found: Month },

    #[error("duplicate series {0}")]
    DuplicateSeries(SeriesId),

    #[error("panel too short: need at least {required} months, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("series {0} has zero variance")]
    DegenerateSeries(usize),

    #[error("missing weight for goods {0}")]
    MissingWeight(u16),

    #[error("matrix is not symmetric (|c[{row},{col}] - c[{col},{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("eigensolver did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mode index {index} out of range 1..={max}")]
    BadModeIndex { index: usize, max: usize },

    #[error("mode count {k} out of range (max {max})")]
    BadModeCount { k: usize, max: usize },

    #[error("aspect ratio q = {0} must exceed 1")]
    QOutOfRange(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("series index {index} out of range 1..={max}")]
    BadSeriesIndex { index: usize, max: usize },

    #[error("lag {lag} out of range 0..={max}")]
    LagOutOfRange { lag: usize, max: usize },

    #[error("confidence {0} must lie in (0, 1)")]
    BadConfidence(f64),

    #[error("null ensemble has no samples")]
    EmptyEnsemble,

    #[error("beta = {0} must be positive")]
    BadBeta(f64),

    #[error("unknown series {0}")]
    UnknownSeries(SeriesId),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("moving-average half-width {xi} too wide for length {len}")]
    WindowTooWide { xi: usize, len: usize },

    #[error("overlap of {0} points is too short for a lag correlation")]
    InsufficientOverlap(usize),

    #[error("frequency index {k} out of range 1..={max}")]
    BadFrequencyIndex { k: usize, max: usize },

    #[error("reduced susceptibility is singular (det = {0:e})")]
    SingularSusceptibility(f64),

    #[error("reference series has zero amplitude at the requested frequency")]
    ReferenceAmplitudeZero,

    #[error("total phase weight vanishes for series {0}")]
    DegenerateWeights(usize),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
