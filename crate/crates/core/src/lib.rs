//! Exact constructive machinery for straight-line flows on a pair of flat
//! tori glued along a vertical slit.
//!
//! The crate provides, over a shared exact-arithmetic core:
//!
//! * continued fractions and best approximation vectors of planar lines,
//!   with certified Diophantine bounds;
//! * holonomy vectors of the slit surface, expansions of a direction into
//!   saddle-connection data, and partition-style summability diagnostics;
//! * the combinatorial tree of slit vectors whose limit directions are
//!   non-ergodic, built with per-node certificates;
//! * lower bounds for the Hausdorff dimension of the limit set via
//!   self-similar covering data;
//! * a discrete-geodesic simulator for the straight-line flow itself.
//!
//! Everything that feeds a decision is computed exactly or with certified
//! rational enclosures; see [`numerics`] for the contract.

pub mod bestapprox;
pub mod construction;
pub mod contfrac;
pub mod error;
pub mod numerics;
pub mod surface;

pub use error::{Error, Result};
