//! Bayesian identification of relevant items through heterogeneous noisy
//! detectors.
//!
//! Each round every item is tested by exactly one detector. Beliefs are
//! updated by Bayes' rule and the next assignment is chosen by one of four
//! policies: greedy entropy/diagnosticity matching ([`strategies::gp_assign`]),
//! exact information-gain matching ([`strategies::hungarian_ig_assign`]),
//! uniform random permutations ([`strategies::psc_assign`]) or Thompson
//! Sampling over unknown detector rates ([`strategies::ts_assign`]).

pub mod calibration;
pub mod cli;
pub mod error;
pub mod matching;
pub mod model;
pub mod simulation;
pub mod strategies;

pub use error::{Error, Result};
