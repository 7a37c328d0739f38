//! Slopes, error bounds, metric subregularity and calmness of
//! extended-real-valued functions and set-valued mappings on R^n.
//!
//! Functions come in two grades. Piecewise structures (`max_affine`,
//! `max_smooth`) get exact subdifferential slopes and exact sublevel
//! distances; black-box functions are sampled on grids, and every result
//! carries an evidence grade saying which of the two it is.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod config;
pub mod error;
pub mod errorbounds;
pub mod ext;
pub mod function;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod lp;
pub mod minnorm;
pub mod numeric;
pub mod polyhedron;
pub mod setvalued;
pub mod sip;
pub mod slopes;

pub use config::Config;
pub use error::{Error, Result};
pub use gauge::{check_growth_condition, Gauge};
pub use geometry::Norm;
pub use grid::Region;
