//! Fleet minimization and allocation planning for bike-sharing trip data.
//!
//! The pipeline: ingest trip CSVs, identify allocation places (docking
//! stations or clustered virtual stations), compute the minimum fleet
//! that serves each day's trips by chaining them onto bikes, plan
//! next-day allocations from a rolling historical maximum, and score
//! plans by unmet-trip ratio and rebalancing effort.

pub mod allocator;
pub mod error;
pub mod evaluator;
pub mod geo;
pub mod ingest;
pub mod matcher;
pub mod scenarios;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Bounds, GeoPoint, PlaceRef};
