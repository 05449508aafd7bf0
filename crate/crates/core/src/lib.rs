//! Behavior-aware, distributionally robust dispatch of distribution feeders
//! with EV charging stations.
//!
//! The outranking, moment and polygon kernels are generic over the float
//! type; network, dispatch and evaluation code works in `f64`.

pub mod ambiguity;
pub mod behavior;
pub mod config;
pub mod conic;
pub mod dopf;
pub mod io;
pub mod netmodel;
pub mod num;
pub mod pipeline;
pub mod posteval;
pub mod promethee;

pub use num::{LinalgScalar, Scalar};

pub type Real = f64;

pub type FlowResult64 = promethee::FlowResult<f64>;
pub type FlowResult32 = promethee::FlowResult<f32>;
pub type PerformanceTable64 = promethee::PerformanceTable<f64>;
pub type PerformanceTable32 = promethee::PerformanceTable<f32>;
pub type WeightVector64 = promethee::WeightVector<f64>;
pub type WeightVector32 = promethee::WeightVector<f32>;
pub type PreferenceThresholds64 = promethee::PreferenceThresholds<f64>;
pub type PreferenceThresholds32 = promethee::PreferenceThresholds<f32>;
pub type Moments64 = ambiguity::Moments<f64>;
pub type Moments32 = ambiguity::Moments<f32>;
pub type AmbiguityParams64 = ambiguity::AmbiguityParams<f64>;
pub type AmbiguityParams32 = ambiguity::AmbiguityParams<f32>;
pub type PolygonEdge64 = dopf::PolygonEdge<f64>;
pub type PolygonEdge32 = dopf::PolygonEdge<f32>;
