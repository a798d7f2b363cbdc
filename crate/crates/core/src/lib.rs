//! Outage, throughput and rate optimization for cooperative HARQ-assisted NOMA
//! among device-to-device links that share the band with a Poisson field of interferers.
//!
//! The analytic path ([`analytic`], [`oma`]) and the Monte Carlo path ([`sim`])
//! evaluate the same protocol; [`optimize`] searches rates, power split and intensity.

pub mod analytic;
pub mod config;
pub mod error;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod oma;
pub mod optimize;
pub mod specfun;
pub mod sums;

pub use analytic::{
    Analyzer, OutageSet, PhiCache, PhiMode, PsiArgs, RoundOutage, Thresholds, ThroughputReport,
};
pub use oma::{OmaAnalyzer, OmaSingleRound, OmaThresholds};
pub use config::{InterferenceMode, NetworkConfig, OmaConfig};
pub use error::{Error, Result};
pub use scalar::Real;

pub type Config = NetworkConfig<f64>;
pub type Analyzer64 = Analyzer<f64>;
pub type Outages = OutageSet<f64>;
pub type Throughput = ThroughputReport<f64>;
