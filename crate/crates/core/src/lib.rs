//! Coverage analysis for UAV relay networks.
//!
//! Terrestrial base stations (TBS) and UAV relay nodes (RN) form two
//! independent homogeneous Poisson point processes. A typical user at the
//! origin is served either directly by its nearest TBS or through its
//! nearest RN, which decodes and forwards the signal of its own nearest TBS.
//!
//! The crate evaluates the coverage probability of that user analytically
//! ([`coverage`]) and by Monte-Carlo simulation ([`mcsim`]), and runs
//! parameter sweeps comparing both ([`experiment`]).

pub mod bessel;
pub mod channel;
pub mod coverage;
pub mod error;
pub mod experiment;
pub mod mcsim;
pub mod model;
pub mod params;
pub mod quad;

pub use channel::{LinkKind, LosState};

pub use coverage::{
    CoverageEngine, CoverageQuery, EngineTolerances, Quantity, RegionTerms, RelayCp, Threshold,
};
pub use error::{Error, Result};
pub use mcsim::{McConfig, McEstimate};

pub use model::{MobilityScheme, MobilityState};
pub use params::NetworkParams;
