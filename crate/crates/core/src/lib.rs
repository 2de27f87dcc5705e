//! Factored multi-view metric 3D scene representation.
//!
//! A scene is described per view by unit ray directions, depth along each
//! ray and a camera pose relative to the first view, plus a single global
//! metric scale factor. This crate provides the composition algebra, the
//! input factorizations, the training loss suite, covisibility-based view
//! sampling, benchmark metrics, an exact analytic scene generator and a
//! forward-only toy alternating-attention network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::cloned_ref_to_slice_refs))]

pub mod cli;
pub mod error;
pub mod factorization;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod neural;
pub mod synth;
pub mod viewgraph;

pub use error::{Error, Result};
pub use grid::Grid;
