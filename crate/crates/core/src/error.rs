use thiserror::Error;

use crate::lattice::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site {0} lies outside the lattice")]
    OutOfBounds(Site),
    #[error("two instructions claim site {0}")]
    SiteCollision(Site),
    #[error("instruction {0} pairs qubits that are not lattice neighbours along +x/+y")]
    NonAdjacentPair(String),
    #[error("tensor fails validation: {0}")]
    InvalidTensor(String),
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("crosstalk evaluated at zero distance")]
    ZeroDistance,
    #[error("gate kind {0} is not covered by the machine or gate semantics")]
    UnknownGateKind(String),
    #[error("invalid patch: {0}")]
    InvalidPatch(String),
    #[error("binding no longer matches the tensor")]
    StaleBinding,
    #[error("rule {name} failed unitary validation (distance {distance:e})")]
    RuleValidationFailed { name: String, distance: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("equivalence class exceeds the cap of {0} circuits")]
    ClassCapExceeded(usize),
    #[error("propagator step violates unitarity tolerance (deviation {0:e})")]
    StepTooCoarse(f64),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("{0} qubits exceed the dense simulation limit")]
    TooManyQubits(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("monte-carlo estimate is not monotone in sigma; increase the sample count")]
    NonMonotoneEstimate,
    #[error("verifier unavailable for {0} qubits")]
    VerifierUnavailable(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
