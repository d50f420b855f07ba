//! Sybil classification from untrusted RSSI signalprints.
//!
//! The crate is split into the geometric core ([`signalprint`]), the
//! classification layer that copes with lying observers
//! ([`classification`]), and a simulator used to evaluate both: a wireless
//! [`channel`], [`adversary`] behaviors, the collection [`protocol`], and the
//! Monte Carlo [`experiments`] harness.
//!
//! Geometry and classification are generic over [`Scalar`]; the aliases
//! below fix the two scalars used in practice.

pub mod adversary;
pub mod channel;
pub mod classification;
pub mod error;
pub mod experiments;
pub mod ids;
pub mod protocol;
pub mod scalar;
pub mod signalprint;
pub mod verify;
pub mod world;

pub use error::{Error, Result};
pub use ids::{IdentityId, NodeId};
pub use scalar::{Exact, Scalar};
pub use signalprint::{generate_view, ReceiverSet, View};

/// Observation matrix over `f64`, the simulator's native scalar.
pub type Observations = signalprint::ObservationMatrix<f64>;
/// Observation matrix over exact rationals.
pub type ExactObservations = signalprint::ObservationMatrix<Exact>;
pub type Thresholds = signalprint::SignalprintThresholds<f64>;
pub type ExactThresholds = signalprint::SignalprintThresholds<Exact>;
pub type Signalprint = signalprint::Signalprint<f64>;
