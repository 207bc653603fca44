//! Construction and numerical certification of codimension-one Anosov flows on circle
//! bundles over a closed hyperbolic surface, and on their fiberwise finite covers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod census;
pub mod certify;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod group;
pub mod io;
pub mod measure;
pub mod quadrature;

pub use error::{LabError, Result};
