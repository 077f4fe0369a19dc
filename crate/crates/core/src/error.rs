//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown hypothesis id {hyp} for class kind {kind}")]
    UnknownHypothesis { kind: String, hyp: u64 },

    #[error("point {point} outside the finite domain of class kind {kind}")]
    PointOutsideDomain { kind: String, point: u64 },

    #[error("invalid class descriptor: {0}")]
    InvalidClass(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("class too rich for batch size {batch}: VC dimension is at least {batch}")]
    ClassTooRich { batch: usize },

    #[error("eluder sequence unobtainable: requested {requested}, max achievable length {achieved}")]
    EluderExhausted { requested: usize, achieved: usize },

    #[error("no disagreement point found within domain budget {budget}")]
    NoDisagreementPoint { budget: u64 },

    #[error("learner error at (b={b}, i={i}): {msg}")]
    LearnerBatch { b: usize, i: usize, msg: String },

    #[error("incompatible learner/class pair: {0}")]
    Incompatible(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("tail mass {tail} exceeds sampling threshold {threshold}")]
    TailTooHeavy { tail: f64, threshold: f64 },

    #[error("conditional label probability not representable at depth {depth} (eta rounds to 1/2)")]
    EtaUnderflow { depth: usize },

    #[error("eta out of range (1/2, 17/32) at depth {depth}: offset {offset}")]
    EtaOutOfRange { depth: usize, offset: f64 },

    #[error("witness tree too shallow: depth {depth} < required {required}")]
    TreeTooShallow { depth: usize, required: usize },

    #[error("rate fit needs at least 3 positive points, got {0}")]
    TooFewPoints(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}
