//! Simulation and numerical analysis of two disordered mean-field models:
//! the random Curie-Weiss spin system under Glauber dynamics and the random
//! Kuramoto rotator system.
//!
//! The crate covers finite-`N` Monte Carlo, the deterministic `N → ∞`
//! limits, linearised operators and their spectra, the Gaussian and
//! critical fluctuation limits, and a statistical harness that compares the
//! two sides.

pub mod cw;
pub mod error;
pub mod experiments;
pub mod kuramoto;
pub mod law;
pub mod limit;
pub mod measure;
pub mod params;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use law::{Atom, DisorderLaw};
pub use measure::{empirical_to_fluctuation, EmpiricalMeasure, FluctuationSeries, SpaceScale, TimeScale};
pub use params::{CwParams, KuramotoParams};
pub use rng::{SeedSpec, Stream};
