//! Synthetic mother-infant cohort with a randomised programme offer,
//! programme uptake, breastfeeding initiation and duration, infant weight
//! at three months, and every potential outcome along the exposure chain.

mod config;
mod generate;
mod io;
mod truth;

pub use config::DgpConfig;
pub use generate::{
    draw_individual, generate, generate_span, Covariates, Education, Exposures, IndividualRecord, PotentialOutcomes,
};
pub use io::{
    export, import, load_dataset, read_dataset, read_records, records_from_dataset, records_to_dataset,
    stream_records, write_records, OBSERVED_COLUMNS, POTENTIAL_COLUMNS,
};
pub use truth::{
    classify_compliance, simulate_truth, true_contrast, truth_table, Compliance, Intervention, NamedContrast,
    Subpopulation, TruthAccumulator, TruthTable,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("subpopulation `{0}` is empty")]
    EmptySubpopulation(String),
    #[error("potential outcomes for {0} are not generated")]
    UnsupportedWorld(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("malformed data: {0}")]
    Parse(String),
}
