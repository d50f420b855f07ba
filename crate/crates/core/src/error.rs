use thiserror::Error;

use crate::ids::IdentityId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signalprint comparison needs at least 2 shared observers, got {0}")]
    DimensionTooSmall(usize),
    #[error("signalprints are over different observer lists")]
    ObserverMismatch,
    #[error("identity {0} appears more than once")]
    DuplicateIdentity(IdentityId),
    #[error("identity {0} is not part of the observation matrix")]
    UnknownIdentity(IdentityId),
    #[error("probe index {index} out of range (matrix holds {probes} probes)")]
    ProbeOutOfRange { index: usize, probes: usize },
    #[error("invalid receiver set: {0}")]
    InvalidReceiverSet(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("formula evaluated outside its domain: {0}")]
    Domain(String),
    #[error("transmitter and receiver positions coincide")]
    CoincidentPositions,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
