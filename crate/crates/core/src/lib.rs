//! Simulation, training-data synthesis and evaluation toolkit for
//! dual-process (slow reasoning / fast reactive) object-goal navigation
//! agents on 2D occupancy grids.

pub mod controller;
pub mod dataset;
pub mod env;
pub mod explore;
pub mod memory;
pub mod metrics;
pub mod planner;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use scalar::{compensated_sum, Point2, RealScalar, Scalar};

/// Planar point in meters.
pub type Point = Point2<f64>;
pub type Point32 = Point2<f32>;

pub type TimeModel64 = metrics::TimeModel<f64>;
pub type TimeModel32 = metrics::TimeModel<f32>;
/// Operation-time model in exact rational arithmetic.
pub type ExactTimeModel = metrics::TimeModel<num_rational::Rational64>;
