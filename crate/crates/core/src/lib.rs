//! Simulation and estimation toolkit for causal effects of a nested chain of
//! binary exposures on a continuous outcome.

pub mod battery;
pub mod error;
pub mod estimands;
pub mod exec;
pub mod inference;
pub mod iv;
pub mod nuc;
pub mod numkit;
pub mod propensity;
pub mod simlearner;
pub mod stats;
