//! Diophantine sampling schedules and higher-order sparse arrays.
//!
//! The crate covers the number theory behind zero-sum sampler triples, exact
//! co-array enumeration for 2q-th order symmetric difference sets, array
//! constructors, sampling planners, synthetic data generation, and
//! third-order moment estimators feeding a Hankel/MUSIC subspace step.

mod bitset;
pub mod coarray;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod geometry;
pub mod numtheory;
pub mod sampling;
pub mod simulate;

pub use error::{Error, Result};
