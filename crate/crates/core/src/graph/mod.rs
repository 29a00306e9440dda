//! Dataset, servers, sharding and replication schemes.

mod data;
mod scheme;
mod servers;
mod sharding;

pub use data::{load_graph, DataGraph, GraphBuilder, GraphError, LabelId, VertexId};
pub use scheme::{load_scheme, server_storage, ReplicationScheme};
pub use servers::{load_servers, ServerId, ServerSet, ServerSetError};
pub use sharding::{fnv1a64, hash_bucket, hash_shard, load_sharding, mix64, ShardingMap};
