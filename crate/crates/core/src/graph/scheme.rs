use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{DataGraph, ServerId, ServerSet, ShardingMap, VertexId};
use crate::cost::Cost;
use crate::format::{FormatError, LineReader};

/// Per-vertex server sets stored as a dense bitset.
///
/// Additions go through atomic `fetch_or` and may run concurrently through a
/// shared reference. Removals need `&mut self`.
#[derive(Debug)]
pub struct ReplicationScheme {
    words: usize,
    servers: usize,
    bits: Vec<AtomicU64>,
}

impl ReplicationScheme {
    /// Empty sets (no copies at all), sized for `vertices` x `servers`.
    pub fn empty(vertices: usize, servers: usize) -> Self {
        let words = servers.div_ceil(64).max(1);
        ReplicationScheme {
            words,
            servers,
            bits: (0..vertices * words).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    /// The scheme `r = d`: only original copies.
    pub fn from_sharding(sharding: &ShardingMap, servers: usize) -> Self {
        let r = Self::empty(sharding.len(), servers);
        for (i, &s) in sharding.as_slice().iter().enumerate() {
            r.add(VertexId(i as u32), s);
        }
        r
    }

    pub fn vertex_count(&self) -> usize {
        self.bits.len() / self.words
    }

    pub fn server_count(&self) -> usize {
        self.servers
    }

    #[inline]
    fn slot(&self, v: VertexId, s: ServerId) -> (&AtomicU64, u64) {
        let word = v.index() * self.words + s.index() / 64;
        (&self.bits[word], 1u64 << (s.index() % 64))
    }

    #[inline]
    pub fn contains(&self, v: VertexId, s: ServerId) -> bool {
        let (w, mask) = self.slot(v, s);
        w.load(Ordering::Acquire) & mask != 0
    }

    /// Adds `s` to `r(v)`. Returns true iff this call inserted it.
    #[inline]
    pub fn add(&self, v: VertexId, s: ServerId) -> bool {
        let (w, mask) = self.slot(v, s);
        w.fetch_or(mask, Ordering::AcqRel) & mask == 0
    }

    /// Removes `s` from `r(v)`. Returns true iff it was present.
    pub fn remove(&mut self, v: VertexId, s: ServerId) -> bool {
        let (w, mask) = self.slot(v, s);
        w.fetch_and(!mask, Ordering::AcqRel) & mask != 0
    }

    /// Servers in `r(v)`, ascending.
    pub fn servers(&self, v: VertexId) -> impl Iterator<Item = ServerId> + '_ {
        let base = v.index() * self.words;
        (0..self.words).flat_map(move |wi| {
            let mut word = self.bits[base + wi].load(Ordering::Acquire);
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(ServerId((wi * 64 + bit) as u16))
            })
        })
    }

    pub fn copy_count(&self, v: VertexId) -> usize {
        let base = v.index() * self.words;
        (0..self.words)
            .map(|wi| self.bits[base + wi].load(Ordering::Acquire).count_ones() as usize)
            .sum()
    }

    /// Total number of copies beyond the original ones.
    pub fn replica_count(&self) -> usize {
        let copies: usize = (0..self.vertex_count() as u32)
            .map(|v| self.copy_count(VertexId(v)))
            .sum();
        copies.saturating_sub(self.vertex_count())
    }

    /// `true` iff `r` contains `other` pointwise.
    pub fn extends(&self, other: &ReplicationScheme) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| {
                let b = b.load(Ordering::Acquire);
                a.load(Ordering::Acquire) & b == b
            })
    }

    /// Vertices whose original server is missing from their copy set.
    pub fn missing_originals(&self, sharding: &ShardingMap) -> Vec<VertexId> {
        (0..self.vertex_count() as u32)
            .map(VertexId)
            .filter(|&v| !self.contains(v, sharding.server_of(v)))
            .collect()
    }

    /// `f_r(s)` for every server.
    pub fn loads(&self, graph: &DataGraph) -> Vec<Cost> {
        let mut loads = vec![Cost::ZERO; self.servers];
        for v in graph.vertices() {
            let c = graph.cost(v);
            for s in self.servers(v) {
                loads[s.index()] += c;
            }
        }
        loads
    }

    /// `Σ_s f_r(s)`, i.e. `Σ_v f(v)·|r(v)|`.
    pub fn total_storage(&self, graph: &DataGraph) -> Cost {
        graph
            .vertices()
            .map(|v| {
                let c = graph.cost(v);
                (0..self.copy_count(v)).map(|_| c).sum::<Cost>()
            })
            .sum()
    }

    pub fn write_to<W: Write>(
        &self,
        graph: &DataGraph,
        servers: &ServerSet,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(w, "#scheme v1")?;
        for v in graph.vertices() {
            let names: Vec<&str> = self.servers(v).map(|s| servers.name(s)).collect();
            writeln!(w, "{} {}", graph.name(v), names.join(","))?;
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

impl Clone for ReplicationScheme {
    fn clone(&self) -> Self {
        ReplicationScheme {
            words: self.words,
            servers: self.servers,
            bits: self
                .bits
                .iter()
                .map(|w| AtomicU64::new(w.load(Ordering::Acquire)))
                .collect(),
        }
    }
}

impl PartialEq for ReplicationScheme {
    fn eq(&self, other: &Self) -> bool {
        self.servers == other.servers && self.extends(other) && other.extends(self)
    }
}

impl Eq for ReplicationScheme {}

/// `f_r(s)`: total cost of the objects with a copy on `server`.
pub fn server_storage(graph: &DataGraph, scheme: &ReplicationScheme, server: ServerId) -> Cost {
    graph
        .vertices()
        .filter(|&v| scheme.contains(v, server))
        .map(|v| graph.cost(v))
        .sum()
}

/// Parses a `#scheme v1` stream. Vertices absent from the file get an empty
/// copy set, so a later original-copy check reports them.
pub fn load_scheme<R: BufRead>(
    source: R,
    graph: &DataGraph,
    servers: &ServerSet,
) -> Result<ReplicationScheme, FormatError> {
    let mut lines = LineReader::new(source, "scheme");
    lines.expect_header("#scheme v1")?;
    let r = ReplicationScheme::empty(graph.vertex_count(), servers.len());
    let mut seen = vec![false; graph.vertex_count()];
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let (vertex, list) = match toks.as_slice() {
            [vertex] => (vertex, None),
            [vertex, list] => (vertex, Some(list)),
            _ => return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" ")))),
        };
        let v = graph
            .vertex(vertex)
            .ok_or_else(|| lines.error_at(lineno, format!("unknown vertex `{vertex}`")))?;
        if std::mem::replace(&mut seen[v.index()], true) {
            return Err(lines.error_at(lineno, format!("duplicate line for vertex `{vertex}`")));
        }
        for name in list
            .iter()
            .flat_map(|l| l.split(','))
            .filter(|n| !n.is_empty())
        {
            let s = servers
                .get(name)
                .ok_or_else(|| lines.error_at(lineno, format!("unknown server `{name}`")))?;
            r.add(v, s);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Imbalance;
    use crate::graph::GraphBuilder;

    fn setup() -> (DataGraph, ServerSet, ShardingMap) {
        let mut b = GraphBuilder::new();
        b.vertex("a", "x", Cost::ONE).unwrap();
        b.vertex("b", "x", Cost::ratio(5, 2)).unwrap();
        b.vertex("c", "x", Cost::from_int(3)).unwrap();
        let g = b.build().unwrap();
        let servers = ServerSet::uniform(70, Imbalance::Unbounded).unwrap();
        let d = ShardingMap::from_vec(vec![ServerId(0), ServerId(0), ServerId(65)]);
        (g, servers, d)
    }

    #[test]
    fn sharding_only_storage() {
        let (g, _, d) = setup();
        let r = ReplicationScheme::from_sharding(&d, 70);
        assert_eq!(server_storage(&g, &r, ServerId(0)), Cost::ratio(7, 2));
        assert_eq!(server_storage(&g, &r, ServerId(65)), Cost::from_int(3));
        assert_eq!(server_storage(&g, &r, ServerId(1)), Cost::ZERO);
        assert_eq!(r.replica_count(), 0);
    }

    #[test]
    fn single_server_unit_costs() {
        let mut b = GraphBuilder::new();
        for i in 0..9 {
            b.vertex(format!("v{i}"), "x", Cost::ONE).unwrap();
        }
        let g = b.build().unwrap();
        let d = ShardingMap::single(&g, ServerId(0));
        let r = ReplicationScheme::from_sharding(&d, 1);
        assert_eq!(server_storage(&g, &r, ServerId(0)), Cost::from_int(9));
    }

    #[test]
    fn replica_raises_storage_by_its_cost() {
        let (g, _, d) = setup();
        let r = ReplicationScheme::from_sharding(&d, 70);
        let before = server_storage(&g, &r, ServerId(65));
        assert!(r.add(g.vertex("b").unwrap(), ServerId(65)));
        assert!(!r.add(g.vertex("b").unwrap(), ServerId(65)));
        assert_eq!(
            server_storage(&g, &r, ServerId(65)) - before,
            Cost::ratio(5, 2)
        );
        assert_eq!(r.replica_count(), 1);
    }

    #[test]
    fn double_counting_identity() {
        let (g, _, d) = setup();
        let r = ReplicationScheme::from_sharding(&d, 70);
        r.add(VertexId(0), ServerId(64));
        r.add(VertexId(2), ServerId(1));
        r.add(VertexId(2), ServerId(69));
        let per_server: Cost = r.loads(&g).iter().sum();
        assert_eq!(per_server, r.total_storage(&g));
    }

    #[test]
    fn file_round_trip_and_missing_original() {
        let (g, servers, d) = setup();
        let r = ReplicationScheme::from_sharding(&d, 70);
        r.add(VertexId(1), ServerId(65));
        let text = r.to_text(&g, &servers);
        assert!(text.contains("b s0,s65\n"), "{text}");
        let again = load_scheme(text.as_bytes(), &g, &servers).unwrap();
        assert_eq!(again, r);

        let corrupted = "#scheme v1\na s0\nb s65\nc s65\n";
        let bad = load_scheme(corrupted.as_bytes(), &g, &servers).unwrap();
        assert_eq!(bad.missing_originals(&d), vec![VertexId(1)]);
    }

    #[test]
    fn removal() {
        let (_, _, d) = setup();
        let mut r = ReplicationScheme::from_sharding(&d, 70);
        r.add(VertexId(0), ServerId(3));
        assert!(r.remove(VertexId(0), ServerId(3)));
        assert!(!r.remove(VertexId(0), ServerId(3)));
        assert_eq!(
            r.servers(VertexId(0)).collect::<Vec<_>>(),
            vec![ServerId(0)]
        );
    }
}
