//! Neighborhood behavior profiling for multi-neighborhood local search.
//!
//! The pipeline collects per-interval counters while a local search runs
//! ([`runlog`], [`search`]), splits the cost axis into quality regions
//! ([`frames`]), aggregates the counters per region ([`aggregate`]), builds
//! per-neighborhood feature vectors ([`features`]) and clusters them with a
//! subspace Gaussian mixture ([`cluster`]). [`tune`] compares configuration
//! spaces built from raw neighborhoods and from clusters.
//!
//! The crate is `no_std` with `alloc`; the `std` feature only forwards to
//! dependencies. IO, file formats and the CLI live in the `nbprofile` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod aggregate;
pub mod cluster;
pub mod features;
pub mod frames;
pub(crate) mod math;
pub mod rng;
pub mod runlog;
pub mod search;
pub mod tune;
