use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{DataGraph, ServerId, ServerSet, VertexId};
use crate::format::{FormatError, LineReader};

/// The sharding function: the server holding each object's original copy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShardingMap {
    assignment: Vec<ServerId>,
}

impl ShardingMap {
    /// Every vertex on `server`.
    pub fn single(graph: &DataGraph, server: ServerId) -> Self {
        ShardingMap {
            assignment: vec![server; graph.vertex_count()],
        }
    }

    pub fn from_vec(assignment: Vec<ServerId>) -> Self {
        ShardingMap { assignment }
    }

    #[inline]
    pub fn server_of(&self, v: VertexId) -> ServerId {
        self.assignment[v.index()]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn as_slice(&self) -> &[ServerId] {
        &self.assignment
    }

    pub(crate) fn reassign(&mut self, v: VertexId, s: ServerId) {
        self.assignment[v.index()] = s;
    }

    pub fn write_to<W: Write>(
        &self,
        graph: &DataGraph,
        servers: &ServerSet,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(w, "#shard v1")?;
        for v in graph.vertices() {
            writeln!(w, "{} {}", graph.name(v), servers.name(self.server_of(v)))?;
        }
        Ok(())
    }

    pub fn to_text(&self, graph: &DataGraph, servers: &ServerSet) -> String {
        let mut buf = Vec::new();
        self.write_to(graph, servers, &mut buf)
            .expect("write to Vec");
        String::from_utf8(buf).expect("utf8")
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the UTF-8 bytes of the vertex id.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bucket of one vertex id: `mix64(fnv1a64(id) ^ seed * 0x9E3779B97F4A7C15) % servers`.
pub fn hash_bucket(vertex_id: &str, seed: u64, servers: usize) -> usize {
    let h = mix64(fnv1a64(vertex_id.as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (h % servers as u64) as usize
}

/// Seeded hash partitioning. Depends only on the vertex id, the seed and the
/// number of servers.
pub fn hash_shard(graph: &DataGraph, servers: &ServerSet, seed: u64) -> ShardingMap {
    let n = servers.len();
    ShardingMap {
        assignment: graph
            .vertices()
            .map(|v| ServerId(hash_bucket(graph.name(v), seed, n) as u16))
            .collect(),
    }
}

/// Parses a `#shard v1` stream and checks it is a total map onto known servers.
pub fn load_sharding<R: BufRead>(
    source: R,
    graph: &DataGraph,
    servers: &ServerSet,
) -> Result<ShardingMap, FormatError> {
    let mut lines = LineReader::new(source, "shard");
    lines.expect_header("#shard v1")?;
    let mut assignment: Vec<Option<ServerId>> = vec![None; graph.vertex_count()];
    let mut first_line: HashMap<VertexId, usize> = HashMap::new();
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let [vertex, server] = toks.as_slice() else {
            return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" "))));
        };
        let v = graph
            .vertex(vertex)
            .ok_or_else(|| lines.error_at(lineno, format!("unknown vertex `{vertex}`")))?;
        let s = servers
            .get(server)
            .ok_or_else(|| lines.error_at(lineno, format!("unknown server `{server}`")))?;
        if let Some(prev) = first_line.insert(v, lineno) {
            return Err(lines.error_at(
                lineno,
                format!("duplicate assignment for vertex `{vertex}` (first on line {prev})"),
            ));
        }
        assignment[v.index()] = Some(s);
    }
    let mut out = Vec::with_capacity(assignment.len());
    for (i, s) in assignment.into_iter().enumerate() {
        match s {
            Some(s) => out.push(s),
            None => {
                return Err(lines.error_at(
                    0,
                    format!(
                        "map not total: vertex `{}` has no server",
                        graph.name(VertexId(i as u32))
                    ),
                ))
            }
        }
    }
    Ok(ShardingMap { assignment: out })
}
