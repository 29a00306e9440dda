//! Latency-bound replication planning for sharded graph datasets.
//!
//! Given a sharded data graph and a workload of multi-hop query types, each
//! with a bound on the number of distributed traversals, the planner computes
//! a replication scheme under which every query path respects its bound.
//! The crate also ships the routing simulator used to validate schemes, the
//! reference-counted resharding map, and exhaustive oracles for tiny
//! instances.

pub mod cost;
pub mod format;
pub mod gen;
pub mod graph;
pub mod oracle;
pub mod planner;
pub mod report;
pub mod reshard;
pub mod routing;
pub mod workload;

pub use cost::{Capacity, Cost, Imbalance};
pub use graph::{DataGraph, ReplicationScheme, ServerId, ServerSet, ShardingMap, VertexId};
