//! Mean-field games of optimal stopping with common noise, solved by linear
//! programming over occupation measures and fictitious play, together with the
//! two-population electricity market they were built for.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fictitious_play;
pub mod lp;
pub mod market;
pub mod model;
pub mod report;
pub mod scenario_tree;
pub mod state_chains;

pub use error::{Error, Result};
