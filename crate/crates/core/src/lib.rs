//! Batch multi-object smoothing under possibility theory.
//!
//! Observations over a fixed window are explained by a set of tracks, each
//! a sequence of detections with an interval of existence, or left as false
//! alarms. The posterior over track sets is an unnormalised possibility
//! function evaluated with per-object Kalman or particle filters, and its
//! mode is searched for by annealed Metropolis-Hastings. Global moves are
//! proposed by a filter that grows several new paths jointly through the
//! scans.
//!
//! The single-object layer ([`possibility`], [`filter`]) is generic over
//! [`Real`] (`f32` or `f64`); the multi-object layers work in `f64`.

pub mod consistency;
pub mod error;
pub mod filter;
pub mod harness;
pub mod hisp;
pub mod mcmc;
pub mod model;
pub mod possibility;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Association, MultiObjectParams, ObsId, Path, Scenario, TargetPossibility, Track, TrackSet};
pub use scalar::Real;

/// `f64` Gaussian possibility.
pub type GaussianPossibility = possibility::GaussianPossibility<f64>;
pub type LinearGaussianModel = filter::LinearGaussianModel<f64>;
pub type BirthPrior = filter::BirthPrior<f64>;
pub type KalmanObjectFilter = filter::KalmanObjectFilter<f64>;
pub type ParticleObjectFilter = filter::ParticleObjectFilter<f64>;
pub type ParticleBelief = filter::ParticleBelief<f64>;
/// Target possibility evaluated with Kalman filters.
pub type KalmanTarget = model::TargetPossibility<filter::KalmanObjectFilter<f64>>;
