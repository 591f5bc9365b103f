//! Optimization-based motion planning with learned warm starts.
//!
//! The crate covers the whole loop: random obstacle worlds and their signed
//! distance fields ([`worldgen`]), sphere-model robots ([`robot`]), the
//! swept-volume trajectory objective ([`objective`]) and its gradient-descent
//! solver ([`optimizer`]), random multi-start labeling ([`multistart`]),
//! basis point set world encoding ([`bps`]), the warm-start regression
//! network ([`net`]) and the dataset improvement loop ([`dataset`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bps;
pub mod dataset;
pub mod error;
pub mod multistart;
pub mod net;
pub mod objective;
pub mod optimizer;
pub mod robot;
pub mod rng;
#[cfg(test)]
mod test_support;
pub mod worldgen;

pub use error::{Error, Result};
