use thiserror::Error;

use crate::estimands::FrameError;
use crate::numkit::NumError;

/// Failures of the propensity, estimation and inference layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimError {
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("positivity violated: {count} unit(s) have a propensity score of exactly 0 or 1")]
    PositivityViolation { count: usize },
    #[error("stratum {stratum} lacks treated or untreated units")]
    EmptyArmInStratum { stratum: usize },
    #[error("no treated units")]
    NoTreatedUnits,
    #[error("no untreated units")]
    NoControlUnits,
    #[error("no unit found a match within the caliper ({dropped} dropped)")]
    UnmatchedUnits { dropped: usize },
    #[error("too few units to estimate the matching variance")]
    InsufficientMatches,
    #[error("instrument barely moves the exposure (first-stage difference {difference:.3e})")]
    WeakOrNullFirstStage { difference: f64 },
    #[error("{failed} of {total} bootstrap replicates failed (limit 5%)")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
