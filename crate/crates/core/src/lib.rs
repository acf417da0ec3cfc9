//! Real-time vehicle body deformation.
//!
//! A coarse control shell (the convex hull of the render mesh, reduced to a
//! point budget and tetrahedralized around its centroid) is simulated with
//! position-based dynamics and elastic/plastic distance constraints. The
//! shell rides on a rigid core and drives the detailed surface through
//! normalized inverse-distance weights.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binding;
pub mod collision;
pub mod dynamics;
pub mod geometry;
pub mod harness;
pub mod vehicle;

pub use geometry::Vec3;
