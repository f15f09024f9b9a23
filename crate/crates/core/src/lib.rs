//! Bounds, constructions and simulation for the capacity per unit energy of
//! Gaussian many-access channels.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! documented tolerances refer to.

pub mod asymptotics;
pub mod bounds;
pub mod codec;
pub mod error;
pub mod gadgets;
pub mod montecarlo;
pub mod numerics;
pub mod orthoexp;
pub mod scalar;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use asymptotics::ThresholdComparison;
pub use numerics::{LogProbability as GenericLogProbability, Probability as GenericProbability, RngSeed};
pub use gadgets::PartitionCertificate;
pub use montecarlo::{SandwichReport, SimEstimate};
pub use types::{BoundDirection, GrowthOrder};

pub type Probability = numerics::Probability<f64>;
pub type LogProbability = numerics::LogProbability<f64>;
pub type ChannelParams = types::ChannelParams<f64>;
pub type CodeSpec = types::CodeSpec<f64>;
pub type RatePerUnitEnergy = types::RatePerUnitEnergy<f64>;
pub type BoundValue = types::BoundValue<f64>;
pub type TdmaParams = bounds::TdmaParams<f64>;
pub type OrthoExponent = orthoexp::OrthoExponent<f64>;
pub type SgbState = orthoexp::SgbState<f64>;
pub type ListSplit = orthoexp::ListSplit<f64>;
pub type FeasibilityVerdict = asymptotics::FeasibilityVerdict<f64>;
pub type Regime = asymptotics::Regime<f64>;
pub type OrthoCapacity = asymptotics::OrthoCapacity<f64>;
pub type Codebook = codec::Codebook<f64>;
pub type MnacSystem = codec::MnacSystem<f64>;
pub type ReceivedVector = codec::ReceivedVector<f64>;
