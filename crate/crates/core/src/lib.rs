//! Dissipative coupled Bose-Josephson junctions: mean-field dynamics,
//! truncated Wigner sampling, quantum trajectories and Liouvillian spectra.

pub mod acceptance;
pub mod classical;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod io;
pub mod model;
pub mod observables;
pub mod ode;
pub mod parallel;
pub mod seeding;
pub mod spectra;
pub mod trajectories;
pub mod twa;

pub use error::{Error, Result};
pub use model::{BlochPair, ClassicalState, Family, FixedPoint, FixedPointSet, ModelParams, Spin, StabilityClass};
