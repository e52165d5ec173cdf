//! Deterministic discrete-time simulator of multi-scale transactive control.
//!
//! Device thermostats and storage bid into feeder retail double auctions;
//! feeder curves aggregate into an area market; an interconnection frequency
//! model closes the loop through ACE/AGC regulation and under-frequency load
//! shedding. A small spectral toolkit quantifies load-shift impacts.

// `!(x > 0.0)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod bidding;
pub mod frequency;
pub mod hierarchy;
pub mod scenario;
pub mod spectral;
pub mod thermal;
