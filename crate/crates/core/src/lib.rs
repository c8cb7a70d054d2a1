//! Monte Carlo toolkit for lattice random walks attracted to stable laws.
//!
//! The crate builds up from increment laws and path sampling (`walks`),
//! through the scale functions that normalise range-type observables
//! (`regvar`), to the observables themselves: the range process and its
//! decompositions (`rangekit`), self-intersection functionals (`silt`), and
//! energy functionals driven by discovery times (`energy`). `youngint`
//! provides the pathwise Stieltjes/Young integration the energy limits are
//! expressed with, and `stats` the estimators and goodness-of-fit tests
//! used to verify distributional claims.
//!
//! Everything is deterministic given a master seed: replica r derives its
//! generator from `walks::replica_seed(master_seed, r)` no matter how the
//! replicas are scheduled.

pub mod energy;
pub mod lattice;
pub mod regvar;
pub mod numutil;
pub mod rangekit;
pub mod silt;
pub mod stats;
pub mod walks;
pub mod youngint;
