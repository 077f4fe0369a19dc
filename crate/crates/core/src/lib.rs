//! Desk-scale laboratory for universal rates in agnostic binary classification.
//!
//! The crate provides executable versions of the combinatorial structures
//! (VC/Littlestone/VCL shattering, eluder sequences), the learning algorithms
//! (finite-class ERM, a memorizing baseline, the near-exponential-rate learner
//! and the super-root-rate learner), the adversarial distribution families
//! used in the matching lower bounds, and a Monte Carlo harness that measures
//! exact excess risk against closed-form optima.

pub mod adversary;
pub mod bounds;
pub mod domain;
pub mod error;
pub mod lab;
pub mod learners;
pub mod partial;
pub mod strategies;

pub use error::{Error, Result};
