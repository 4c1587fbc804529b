//! Joint clock synchronization and localization of a mobile user from
//! asymmetric time-stamp exchanges, MUSIC angle-of-arrival estimates and a
//! neural line-of-sight gate, fused in a hybrid Gaussian / Gaussian-mixture
//! Bayesian filter.
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix the
//! common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod clock;
pub mod error;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod mlp;
pub mod music;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::{wrap_angle, Scalar, SPEED_OF_LIGHT};

/// Double-double scalar (about 106 significant bits).
pub use twofloat::TwoFloat;

pub type Vec2f = linalg::Vec2<f64>;
pub type Mat2f = linalg::Mat2<f64>;
pub type ClockParamsF = clock::ClockParams<f64>;
pub type TimestampRecordF = clock::TimestampRecord<f64>;
pub type ClockLikelihoodF = clock::ClockLikelihood<f64>;
pub type ArrayGeometryF = channel::ArrayGeometry<f64>;
pub type CirSnapshotF = channel::CirSnapshot<f64>;
pub type PosteriorF = filter::JointPosterior<f64>;
pub type DePfF = filter::DePf<f64>;
pub type MlpModelF = mlp::MlpModel<f64>;

/// Extended-precision instantiations for time-stamp arithmetic.
pub type ClockParamsX = clock::ClockParams<TwoFloat>;
pub type TimestampRecordX = clock::TimestampRecord<TwoFloat>;
pub type ClockLikelihoodX = clock::ClockLikelihood<TwoFloat>;
pub type PosteriorX = filter::JointPosterior<TwoFloat>;
pub type DePfX = filter::DePf<TwoFloat>;
