//! Resharding map and reference-counted replica relocation.
//!
//! The planner records a pair `⟨u, v⟩` whenever the latency guarantee of some
//! path relies on `v` having a copy on the server of `u`'s original. `RC(v, s)`
//! counts the distinct originals on `s` that rely on `v`. When originals move,
//! their dependents follow them and copies whose count drops to zero are
//! garbage-collected.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::format::{FormatError, LineReader};
use crate::graph::{DataGraph, ReplicationScheme, ServerId, ServerSet, ShardingMap, VertexId};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReshardingMap {
    entries: BTreeMap<VertexId, BTreeSet<VertexId>>,
    ref_counts: BTreeMap<(VertexId, ServerId), u32>,
}

impl ReshardingMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `v` must be co-located with the original of `u`, which
    /// lives on `s`. Idempotent per `(u, v)`. Returns true if the pair is new.
    pub fn record_colocation(&mut self, u: VertexId, v: VertexId, s: ServerId) -> bool {
        if u == v {
            return false;
        }
        let fresh = self.entries.entry(u).or_default().insert(v);
        if fresh {
            *self.ref_counts.entry((v, s)).or_insert(0) += 1;
        }
        fresh
    }

    pub fn rc(&self, v: VertexId, s: ServerId) -> u32 {
        self.ref_counts.get(&(v, s)).copied().unwrap_or(0)
    }

    /// Objects whose copies follow `u`.
    pub fn associated(&self, u: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.get(&u).into_iter().flatten().copied()
    }

    pub fn contains(&self, u: VertexId, v: VertexId) -> bool {
        self.entries.get(&u).is_some_and(|s| s.contains(&v))
    }

    pub fn pair_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.entries
            .iter()
            .flat_map(|(&u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    pub fn ref_counts(&self) -> impl Iterator<Item = ((VertexId, ServerId), u32)> + '_ {
        self.ref_counts.iter().map(|(&k, &c)| (k, c))
    }

    /// `Σ_s RC(v, s)`.
    pub fn total_rc(&self, v: VertexId) -> u32 {
        self.ref_counts
            .range((v, ServerId(0))..=(v, ServerId(u16::MAX)))
            .map(|(_, &c)| c)
            .sum()
    }

    /// Number of distinct originals associated with `v`.
    pub fn association_count(&self, v: VertexId) -> u32 {
        self.entries.values().filter(|vs| vs.contains(&v)).count() as u32
    }

    /// Folds in pairs recorded elsewhere under the same sharding.
    pub fn merge(&mut self, other: ReshardingMap, sharding: &ShardingMap) {
        for (u, vs) in other.entries {
            for v in vs {
                self.record_colocation(u, v, sharding.server_of(u));
            }
        }
    }

    fn decrement(&mut self, v: VertexId, s: ServerId) -> u32 {
        match self.ref_counts.get_mut(&(v, s)) {
            Some(c) => {
                *c = c.saturating_sub(1);
                let left = *c;
                if left == 0 {
                    self.ref_counts.remove(&(v, s));
                }
                left
            }
            None => 0,
        }
    }

    fn increment(&mut self, v: VertexId, s: ServerId) {
        *self.ref_counts.entry((v, s)).or_insert(0) += 1;
    }

    pub fn write_to<W: Write>(
        &self,
        graph: &DataGraph,
        servers: &ServerSet,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(w, "#rmap v1")?;
        for (u, v) in self.pairs() {
            writeln!(w, "{} {}", graph.name(u), graph.name(v))?;
        }
        for ((v, s), c) in self.ref_counts() {
            writeln!(w, "RC {} {} {}", graph.name(v), servers.name(s), c)?;
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

/// Parses a `#rmap v1` stream and checks every `RC` line against the counts
/// implied by the pairs and the sharding.
pub fn load_rmap<R: BufRead>(
    source: R,
    graph: &DataGraph,
    servers: &ServerSet,
    sharding: &ShardingMap,
) -> Result<ReshardingMap, FormatError> {
    let mut lines = LineReader::new(source, "rmap");
    lines.expect_header("#rmap v1")?;
    let mut rm = ReshardingMap::new();
    let mut declared: BTreeMap<(VertexId, ServerId), (u32, usize)> = BTreeMap::new();
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let vertex = |name: &str| {
            graph
                .vertex(name)
                .ok_or_else(|| lines.error_at(lineno, format!("unknown vertex `{name}`")))
        };
        match toks.as_slice() {
            [u, v] => {
                let (u, v) = (vertex(u)?, vertex(v)?);
                rm.record_colocation(u, v, sharding.server_of(u));
            }
            [tag, v, s, count] if tag == "RC" => {
                let v = vertex(v)?;
                let s = servers
                    .get(s)
                    .ok_or_else(|| lines.error_at(lineno, format!("unknown server `{s}`")))?;
                let count: u32 = count
                    .parse()
                    .map_err(|_| lines.error_at(lineno, format!("bad count `{count}`")))?;
                if declared.insert((v, s), (count, lineno)).is_some() {
                    return Err(lines.error_at(lineno, "duplicate RC line"));
                }
            }
            _ => return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" ")))),
        }
    }
    for (&(v, s), &(count, lineno)) in &declared {
        if rm.rc(v, s) != count {
            return Err(lines.error_at(
                lineno,
                format!(
                    "inconsistent reference count for `{}` on `{}`: file says {count}, pairs imply {}",
                    graph.name(v),
                    servers.name(s),
                    rm.rc(v, s)
                ),
            ));
        }
    }
    if let Some(((v, s), c)) = rm.ref_counts().find(|(k, _)| !declared.contains_key(k)) {
        return Err(lines.error_at(
            0,
            format!(
                "missing RC line for `{}` on `{}` (pairs imply {c})",
                graph.name(v),
                servers.name(s)
            ),
        ));
    }
    Ok(rm)
}

/// Relocation of one original copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Move {
    pub vertex: VertexId,
    pub from: ServerId,
    pub to: ServerId,
}

/// Parses a `#moves v1` stream of `<vertex> <from> <to>` lines.
pub fn load_moves<R: BufRead>(
    source: R,
    graph: &DataGraph,
    servers: &ServerSet,
) -> Result<Vec<Move>, FormatError> {
    let mut lines = LineReader::new(source, "moves");
    lines.expect_header("#moves v1")?;
    let mut moves = Vec::new();
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let [v, from, to] = toks.as_slice() else {
            return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" "))));
        };
        let vertex = graph
            .vertex(v)
            .ok_or_else(|| lines.error_at(lineno, format!("unknown vertex `{v}`")))?;
        let server = |name: &str| {
            servers
                .get(name)
                .ok_or_else(|| lines.error_at(lineno, format!("unknown server `{name}`")))
        };
        moves.push(Move {
            vertex,
            from: server(from)?,
            to: server(to)?,
        });
    }
    Ok(moves)
}

pub fn write_moves<W: Write>(
    moves: &[Move],
    graph: &DataGraph,
    servers: &ServerSet,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "#moves v1")?;
    for m in moves {
        writeln!(
            w,
            "{} {} {}",
            graph.name(m.vertex),
            servers.name(m.from),
            servers.name(m.to)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReshardError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("move of `{vertex}` claims source `{claimed}` but its original is on `{actual}`")]
    WrongSource {
        vertex: String,
        claimed: String,
        actual: String,
    },
    #[error("moving `{vertex}` would put server `{server}` over its capacity; batch rejected")]
    CapacityExceeded { vertex: String, server: String },
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct ReshardSummary {
    pub moves_applied: usize,
    pub copies_added: usize,
    pub copies_removed: usize,
}

/// Applies a batch of moves atomically: on error nothing is modified.
pub fn apply_reshard(
    moves: &[Move],
    graph: &DataGraph,
    servers: &ServerSet,
    scheme: &mut ReplicationScheme,
    rm: &mut ReshardingMap,
    sharding: &mut ShardingMap,
) -> Result<ReshardSummary, ReshardError> {
    let mut r = scheme.clone();
    let mut map = rm.clone();
    let mut d = sharding.clone();
    let mut loads = r.loads(graph);
    let mut summary = ReshardSummary::default();

    for m in moves {
        let u = m.vertex;
        if u.index() >= graph.vertex_count() {
            return Err(ReshardError::UnknownVertex(u));
        }
        if d.server_of(u) != m.from {
            return Err(ReshardError::WrongSource {
                vertex: graph.name(u).to_string(),
                claimed: servers.name(m.from).to_string(),
                actual: servers.name(d.server_of(u)).to_string(),
            });
        }
        summary.moves_applied += 1;
        if m.from == m.to {
            continue;
        }
        d.reassign(u, m.to);
        if r.add(u, m.to) {
            loads[m.to.index()] += graph.cost(u);
            summary.copies_added += 1;
        }
        // The old original stays behind as a replica only if some original on
        // `from` still relies on it.
        if map.rc(u, m.from) < 1 && r.remove(u, m.from) {
            loads[m.from.index()] -= graph.cost(u);
            summary.copies_removed += 1;
        }
        let followers: Vec<VertexId> = map.associated(u).collect();
        for v in followers {
            let left = map.decrement(v, m.from);
            map.increment(v, m.to);
            if r.add(v, m.to) {
                loads[m.to.index()] += graph.cost(v);
                summary.copies_added += 1;
            }
            if left < 1 && d.server_of(v) != m.from && r.remove(v, m.from) {
                loads[m.from.index()] -= graph.cost(v);
                summary.copies_removed += 1;
            }
        }
        if !servers.capacity(m.to).admits(loads[m.to.index()]) {
            return Err(ReshardError::CapacityExceeded {
                vertex: graph.name(u).to_string(),
                server: servers.name(m.to).to_string(),
            });
        }
    }

    *scheme = r;
    *rm = map;
    *sharding = d;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{Capacity, Cost, Imbalance};
    use crate::graph::GraphBuilder;

    fn graph(n: usize) -> DataGraph {
        let mut b = GraphBuilder::new();
        for i in 0..n {
            b.vertex(format!("v{i}"), "x", Cost::ONE).unwrap();
        }
        b.build().unwrap()
    }

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    fn s(i: u16) -> ServerId {
        ServerId(i)
    }

    #[test]
    fn record_counts_distinct_originals() {
        let mut rm = ReshardingMap::new();
        assert!(rm.record_colocation(v(0), v(5), s(1)));
        assert_eq!(rm.rc(v(5), s(1)), 1);
        assert!(rm.record_colocation(v(1), v(5), s(1)));
        assert_eq!(rm.rc(v(5), s(1)), 2);
        assert!(!rm.record_colocation(v(1), v(5), s(1)));
        assert_eq!(rm.rc(v(5), s(1)), 2);
        assert_eq!(rm.total_rc(v(5)), 2);
        assert!(!rm.record_colocation(v(2), v(2), s(0)));
    }

    #[test]
    fn replica_follows_its_original() {
        // u = v0 on s0, v = v1 on s1 with a replica on s0 for u.
        let g = graph(2);
        let servers = ServerSet::uniform(3, Imbalance::Unbounded).unwrap();
        let mut d = ShardingMap::from_vec(vec![s(0), s(1)]);
        let mut r = ReplicationScheme::from_sharding(&d, 3);
        r.add(v(1), s(0));
        let mut rm = ReshardingMap::new();
        rm.record_colocation(v(0), v(1), s(0));

        let moves = [Move {
            vertex: v(0),
            from: s(0),
            to: s(2),
        }];
        apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d).unwrap();
        assert_eq!(d.server_of(v(0)), s(2));
        assert_eq!(r.servers(v(0)).collect::<Vec<_>>(), vec![s(2)]);
        assert_eq!(r.servers(v(1)).collect::<Vec<_>>(), vec![s(1), s(2)]);
        assert_eq!(rm.rc(v(1), s(0)), 0);
        assert_eq!(rm.rc(v(1), s(2)), 1);
    }

    #[test]
    fn replica_kept_while_another_original_needs_it() {
        let g = graph(3);
        let servers = ServerSet::uniform(3, Imbalance::Unbounded).unwrap();
        // u = v0 and w = v2 on s0 both rely on v = v1 (original on s1).
        let mut d = ShardingMap::from_vec(vec![s(0), s(1), s(0)]);
        let mut r = ReplicationScheme::from_sharding(&d, 3);
        r.add(v(1), s(0));
        let mut rm = ReshardingMap::new();
        rm.record_colocation(v(0), v(1), s(0));
        rm.record_colocation(v(2), v(1), s(0));

        let moves = [Move {
            vertex: v(0),
            from: s(0),
            to: s(2),
        }];
        apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d).unwrap();
        assert!(r.contains(v(1), s(0)));
        assert!(r.contains(v(1), s(2)));
        assert_eq!(rm.rc(v(1), s(0)), 1);
        assert_eq!(rm.rc(v(1), s(2)), 1);
    }

    #[test]
    fn moving_next_to_an_existing_original_adds_nothing() {
        let g = graph(2);
        let servers = ServerSet::uniform(2, Imbalance::Unbounded).unwrap();
        let mut d = ShardingMap::from_vec(vec![s(0), s(1)]);
        let mut r = ReplicationScheme::from_sharding(&d, 2);
        r.add(v(1), s(0));
        let mut rm = ReshardingMap::new();
        rm.record_colocation(v(0), v(1), s(0));

        let moves = [Move {
            vertex: v(0),
            from: s(0),
            to: s(1),
        }];
        let summary = apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d).unwrap();
        assert_eq!(r.servers(v(1)).collect::<Vec<_>>(), vec![s(1)]);
        assert_eq!(rm.rc(v(1), s(1)), 1);
        assert_eq!(rm.rc(v(1), s(0)), 0);
        // u itself moved (one copy added) and two copies left s0.
        assert_eq!(summary.copies_added, 1);
        assert_eq!(summary.copies_removed, 2);
    }

    #[test]
    fn original_never_garbage_collected() {
        let g = graph(2);
        let servers = ServerSet::uniform(2, Imbalance::Unbounded).unwrap();
        // v1's original is on s0 next to u = v0.
        let mut d = ShardingMap::from_vec(vec![s(0), s(0)]);
        let mut r = ReplicationScheme::from_sharding(&d, 2);
        let mut rm = ReshardingMap::new();
        rm.record_colocation(v(0), v(1), s(0));
        let moves = [Move {
            vertex: v(0),
            from: s(0),
            to: s(1),
        }];
        apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d).unwrap();
        assert!(r.contains(v(1), s(0)));
        assert!(r.contains(v(1), s(1)));
    }

    #[test]
    fn capacity_rejection_is_atomic() {
        let g = graph(2);
        let servers = ServerSet::new(
            [
                ("s0", Capacity::UNBOUNDED),
                ("s1", Capacity(Some(Cost::ONE))),
            ],
            Imbalance::Unbounded,
        )
        .unwrap();
        let mut d = ShardingMap::from_vec(vec![s(0), s(1)]);
        let mut r = ReplicationScheme::from_sharding(&d, 2);
        let mut rm = ReshardingMap::new();
        let (r0, d0) = (r.clone(), d.clone());
        let moves = [Move {
            vertex: v(0),
            from: s(0),
            to: s(1),
        }];
        let err = apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d).unwrap_err();
        assert!(matches!(err, ReshardError::CapacityExceeded { .. }));
        assert_eq!(r, r0);
        assert_eq!(d, d0);
    }

    #[test]
    fn wrong_source_rejected() {
        let g = graph(1);
        let servers = ServerSet::uniform(2, Imbalance::Unbounded).unwrap();
        let mut d = ShardingMap::from_vec(vec![s(0)]);
        let mut r = ReplicationScheme::from_sharding(&d, 2);
        let mut rm = ReshardingMap::new();
        let moves = [Move {
            vertex: v(0),
            from: s(1),
            to: s(0),
        }];
        assert!(matches!(
            apply_reshard(&moves, &g, &servers, &mut r, &mut rm, &mut d),
            Err(ReshardError::WrongSource { .. })
        ));
    }

    #[test]
    fn rmap_file_round_trip_and_consistency() {
        let g = graph(3);
        let servers = ServerSet::uniform(2, Imbalance::Unbounded).unwrap();
        let d = ShardingMap::from_vec(vec![s(0), s(1), s(0)]);
        let mut rm = ReshardingMap::new();
        rm.record_colocation(v(0), v(1), s(0));
        rm.record_colocation(v(2), v(1), s(0));
        rm.record_colocation(v(1), v(0), s(1));
        let text = rm.to_text(&g, &servers);
        assert_eq!(load_rmap(text.as_bytes(), &g, &servers, &d).unwrap(), rm);

        let tampered = text.replace("RC v1 s0 2", "RC v1 s0 3");
        assert!(load_rmap(tampered.as_bytes(), &g, &servers, &d).is_err());
        let dropped = text.replace("RC v1 s0 2\n", "");
        assert!(load_rmap(dropped.as_bytes(), &g, &servers, &d).is_err());
    }

    #[test]
    fn moves_file() {
        let g = graph(2);
        let servers = ServerSet::uniform(2, Imbalance::Unbounded).unwrap();
        let moves = load_moves("#moves v1\nv1 s1 s0\n".as_bytes(), &g, &servers).unwrap();
        assert_eq!(
            moves,
            vec![Move {
                vertex: v(1),
                from: s(1),
                to: s(0)
            }]
        );
        assert!(load_moves("#moves v1\nv9 s1 s0\n".as_bytes(), &g, &servers).is_err());
        assert!(load_moves("#moves v1\nv1 s1\n".as_bytes(), &g, &servers).is_err());
    }
}
