//! Connected-vehicle simulation toolkit.
//!
//! Basic Safety Message (BSM) records are grouped into timeframes, the
//! vehicles of each timeframe are placed in a great-circle distance matrix,
//! and the matrix is thresholded at the DSRC range and closed under boolean
//! squaring to obtain multi-hop connectivity partitions.

pub mod bench;
pub mod bsm;
pub mod datagen;
pub mod geo;
pub mod partition;
pub mod timeline;

pub use bsm::{BsmError, BsmRecord, Timeframe};
pub use geo::{DistanceMatrix, GeoError, GeoPoint, GeoRect};
pub use partition::{ClosureTrace, ConnectivityMatrix, PartitionAssignment, PartitionError};

/// Default DSRC radio range in meters.
pub const DEFAULT_RANGE_M: f64 = 1000.0;
