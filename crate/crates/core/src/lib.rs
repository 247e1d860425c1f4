//! Ride-pooling planning on time-invariant network flow models.
//!
//! The pipeline is:
//!
//! 1. ingest a [`RoadNetwork`] and its travel [`Request`]s ([`network`]),
//! 2. precompute the best serving sequence of every bag of up to `K` requests
//!    ([`spatial`]),
//! 3. run the greedy pooling assignment using the Poisson co-occurrence
//!    probability ([`temporal`], [`assignment`]),
//! 4. solve the resulting network flow problem with rebalancing and report the
//!    planning metrics ([`flow`]).
//!
//! [`granularity`] coarsens a network by k-means node clustering, and
//! [`experiment`] drives parameter sweeps for the `ridepool` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod demand;
mod error;
pub mod experiment;
pub mod flow;
pub mod granularity;
pub mod network;
pub mod pipeline;
pub mod spatial;
pub mod temporal;

pub use assignment::{AssignmentResult, RidePoolingDemand};
pub use demand::{DemandMatrix, Request};
pub use error::{Error, Result};
pub use flow::{FlowSolution, MetricsReport, VehicleItinerary};
pub use network::{Arc, RoadNetwork, ShortestPathTable};
pub use spatial::{Bag, PoolOption, PoolOptions, Sequence};
pub use temporal::TemporalParams;

/// Node index, zero-based. Files use one-based ids.
pub type NodeId = usize;
/// Position of an arc in [`RoadNetwork::arcs`].
pub type ArcId = usize;
/// Position of a request in the request list.
pub type RequestId = usize;

/// Minutes per hour: demands are requests/hour, times are minutes.
pub const MINUTES_PER_HOUR: f64 = 60.0;
