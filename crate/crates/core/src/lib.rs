//! Fractional perimeters of planar k-clusters.
//!
//! The crate evaluates the nonlocal interaction energy of pixel clusters
//! with prescribed exterior phases, minimizes it over label fields, computes
//! fractional curvatures of analytic sets and grid phases, and solves for the
//! stationary weighted three-phase cones.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cones;
pub mod energy;
pub mod curvature;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod minimizer;
pub mod quad;

pub use error::{Error, Result};
