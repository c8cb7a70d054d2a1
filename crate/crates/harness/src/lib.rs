//! Experiment harness around `rangelab-core`: run configurations, a
//! parallel replica runner with resumable JSON-lines output, statistical
//! report builders, and the verification suite behind `rangelab verify`.

use rangelab_core::energy::EnergyError;
use rangelab_core::lattice::LatticeError;
use rangelab_core::rangekit::RangeError;
use rangelab_core::regvar::RegvarError;
use rangelab_core::silt::SiltError;
use rangelab_core::stats::StatsError;
use rangelab_core::walks::WalkError;
use rangelab_core::youngint::YoungError;
use thiserror::Error;

pub mod acceptance;
pub mod config;
pub mod profiles;
pub mod reports;
pub mod runner;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error(transparent)]
    Silt(#[from] SiltError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Regvar(#[from] RegvarError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Young(#[from] YoungError),
    #[error("unknown profile {0:?}; expected \"fast\" or \"full\"")]
    UnknownProfile(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("ensemble build failed: {0}")]
    Build(String),
}
