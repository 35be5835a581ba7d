//! Planning simulator for 140 GHz wireless midhaul links between Central
//! Units (CUs) and Distributed Units (DUs).
//!
//! The pipeline is:
//!
//! 1. [`scene`] builds a rooftop deployment and synthesizes multipath
//!    [`trace::PathRecord`]s (or [`trace`] ingests them from CSV).
//! 2. [`planner`] builds the CU/DU connectivity graph, greedily selects a CU
//!    subset and associates every DU with its strongest selected CU.
//! 3. [`arrays`] aligns the planar arrays, [`channel`] turns the paths into
//!    narrowband MIMO channels, and [`mimo`] computes SLNR (or zero-forcing)
//!    precoders, SINRs and capped link rates.
//! 4. The planner repeats with more CUs until every link meets the peak-rate
//!    target, or searches all subsets exhaustively.

pub mod arrays;
pub mod channel;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod linalg;
pub mod mimo;
pub mod node;
pub mod planner;
pub mod report;
pub mod scene;
pub mod trace;

pub use arrays::{ArrayConfig, ArrayState, ElementPattern, SpatialSignature};
pub use channel::ChannelMatrix;
pub use linalg::{CMatrix, CVector, C64};
pub use mimo::{LinkMetrics, PrecodedGroup, PrecoderKind};
pub use node::{Node, NodeId, NodeKind};
pub use planner::{AssociationPlan, ConnectivityGraph, EvalOptions, PlannerMode};
pub use scene::{Building, SceneConfig};
pub use trace::{NoiseSpec, PathRecord, RadioParams, Scenario};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power ratio in dB to linear scale.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB; zero maps to `-inf`.
#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * x.log10()
    }
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}
