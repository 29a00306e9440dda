//! Exhaustive ground truth for tiny instances, plus the bisection problems
//! used to build hard instances.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::cost::{Capacity, Cost, Imbalance};
use crate::graph::{
    DataGraph, GraphBuilder, ReplicationScheme, ServerId, ServerSet, ShardingMap, VertexId,
};
use crate::planner::enumerate_candidates;
use crate::routing::access_locations;
use crate::workload::{
    enumerate_paths, CausalAccessPath, LatencyBound, QueryType, Step, WorkloadSpec,
};

/// Largest search space (in replica slots or vertices) the oracles accept.
pub const ENUMERATION_BUDGET: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {what} is {size}, budget is {budget}")]
    OverBudget {
        what: &'static str,
        size: usize,
        budget: usize,
    },
    #[error("graph has {0} vertices; a bisection needs an even count")]
    OddVertexCount(usize),
    #[error("graph is not 3-regular (vertex {vertex} has degree {degree})")]
    NotCubic { vertex: usize, degree: usize },
}

/// All inputs of one replication problem.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub graph: DataGraph,
    pub servers: ServerSet,
    pub sharding: ShardingMap,
    pub workload: WorkloadSpec,
}

impl ProblemInstance {
    /// Writes `graph.txt`, `servers.txt`, `shard.txt` and `workload.txt`.
    pub fn write_files(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("graph.txt"), self.graph.to_text())?;
        fs::write(dir.join("servers.txt"), self.servers.to_text())?;
        fs::write(
            dir.join("shard.txt"),
            self.sharding.to_text(&self.graph, &self.servers),
        )?;
        fs::write(dir.join("workload.txt"), self.workload.to_text())?;
        Ok(())
    }

    /// Workload paths whose bound can bind, with that bound.
    pub fn constrained_paths(&self) -> Vec<(CausalAccessPath, usize)> {
        let mut out = Vec::new();
        for qt in &self.workload.queries {
            for p in enumerate_paths(&self.graph, qt) {
                if let Some(t) = qt.bound.effective(p.hops()) {
                    out.push((p, t));
                }
            }
        }
        out
    }

    fn with_override(&self, t: Option<LatencyBound>) -> std::borrow::Cow<'_, ProblemInstance> {
        match t {
            None => std::borrow::Cow::Borrowed(self),
            Some(b) => std::borrow::Cow::Owned(ProblemInstance {
                workload: self.workload.with_bound(b),
                ..self.clone()
            }),
        }
    }
}

/// Where the first access of a path may be served.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootRouting {
    /// The original copy of the root, as the routing simulator does.
    Pinned,
    /// Any server holding a copy of the root.
    AnyCopy,
}

/// Replica slots `(v, s)` with `s ≠ d(v)`, one bit each.
struct SlotSpace<'a> {
    inst: &'a ProblemInstance,
    slots: Vec<(VertexId, ServerId)>,
    index: Vec<Option<u8>>,
    servers: usize,
}

impl<'a> SlotSpace<'a> {
    fn new(inst: &'a ProblemInstance) -> Result<Self, OracleError> {
        let servers = inst.servers.len();
        let size = inst.graph.vertex_count() * servers.saturating_sub(1);
        if size > ENUMERATION_BUDGET {
            return Err(OracleError::OverBudget {
                what: "|V|·(|S|−1)",
                size,
                budget: ENUMERATION_BUDGET,
            });
        }
        let mut slots = Vec::new();
        let mut index = vec![None; inst.graph.vertex_count() * servers];
        for v in inst.graph.vertices() {
            for s in inst.servers.ids() {
                if s != inst.sharding.server_of(v) {
                    index[v.index() * servers + s.index()] = Some(slots.len() as u8);
                    slots.push((v, s));
                }
            }
        }
        Ok(SlotSpace {
            inst,
            slots,
            index,
            servers,
        })
    }

    #[inline]
    fn contains(&self, mask: u32, v: VertexId, s: ServerId) -> bool {
        match self.index[v.index() * self.servers + s.index()] {
            None => true,
            Some(k) => mask >> k & 1 == 1,
        }
    }

    fn latency_from(&self, mask: u32, nodes: &[VertexId], start: ServerId) -> usize {
        let d = &self.inst.sharding;
        let mut cur = start;
        let mut hops = 0;
        for &v in &nodes[1..] {
            if !self.contains(mask, v, cur) {
                cur = d.server_of(v);
                hops += 1;
            }
        }
        hops
    }

    fn latency(&self, mask: u32, nodes: &[VertexId], routing: RootRouting) -> usize {
        let root = nodes[0];
        match routing {
            RootRouting::Pinned => {
                self.latency_from(mask, nodes, self.inst.sharding.server_of(root))
            }
            RootRouting::AnyCopy => self
                .inst
                .servers
                .ids()
                .filter(|&s| self.contains(mask, root, s))
                .map(|s| self.latency_from(mask, nodes, s))
                .min()
                .unwrap_or(usize::MAX),
        }
    }

    fn loads(&self, mask: u32, base: &[Cost]) -> Vec<Cost> {
        let mut loads = base.to_vec();
        for (k, &(v, s)) in self.slots.iter().enumerate() {
            if mask >> k & 1 == 1 {
                loads[s.index()] += self.inst.graph.cost(v);
            }
        }
        loads
    }

    fn storage_ok(&self, loads: &[Cost]) -> bool {
        let servers = &self.inst.servers;
        servers
            .ids()
            .all(|s| servers.capacity(s).admits(loads[s.index()]))
            && servers.imbalance().admits(loads)
    }

    fn scheme(&self, mask: u32) -> ReplicationScheme {
        let r = ReplicationScheme::from_sharding(&self.inst.sharding, self.servers);
        for (k, &(v, s)) in self.slots.iter().enumerate() {
            if mask >> k & 1 == 1 {
                r.add(v, s);
            }
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub scheme: ReplicationScheme,
    pub total_storage: Cost,
    pub added_cost: Cost,
    pub replicas: usize,
}

/// Minimum total storage over every replica subset that satisfies latency,
/// capacity and balance under pinned routing. Among equal costs the scheme
/// with fewest replicas wins, so the result never carries unused copies.
pub fn brute_force_optimal(
    inst: &ProblemInstance,
    t_override: Option<LatencyBound>,
) -> Result<Option<Optimum>, OracleError> {
    let inst = inst.with_override(t_override);
    let space = SlotSpace::new(&inst)?;
    let paths = inst.constrained_paths();
    let base = ReplicationScheme::from_sharding(&inst.sharding, space.servers).loads(&inst.graph);
    let costs: Vec<Cost> = space
        .slots
        .iter()
        .map(|&(v, _)| inst.graph.cost(v))
        .collect();

    let mut best: Option<(Cost, u32, u32)> = None;
    for mask in 0u32..(1u32 << space.slots.len()) {
        let added: Cost = (0..space.slots.len())
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| costs[k])
            .sum();
        let key = (added, mask.count_ones());
        if best.is_some_and(|(c, n, _)| key >= (c, n)) {
            continue;
        }
        if !space.storage_ok(&space.loads(mask, &base)) {
            continue;
        }
        if paths
            .iter()
            .all(|(p, t)| space.latency(mask, &p.nodes, RootRouting::Pinned) <= *t)
        {
            best = Some((added, key.1, mask));
        }
    }
    Ok(best.map(|(added, replicas, mask)| Optimum {
        scheme: space.scheme(mask),
        total_storage: inst.graph.total_cost() + added,
        added_cost: added,
        replicas: replicas as usize,
    }))
}

/// Some scheme satisfying all constraints, or `None`.
///
/// When every constrained path has bound 0 and balance is unconstrained the
/// search assigns each path to one server holding all of its objects, which
/// scales to the reduction instances. Otherwise it enumerates replica subsets
/// under the usual budget.
pub fn brute_force_feasible(
    inst: &ProblemInstance,
    routing: RootRouting,
) -> Result<Option<ReplicationScheme>, OracleError> {
    let paths = inst.constrained_paths();
    if inst.servers.imbalance() == Imbalance::Unbounded && paths.iter().all(|(_, t)| *t == 0) {
        return Ok(ZeroLatencySearch::new(inst, &paths, routing).run());
    }
    let space = SlotSpace::new(inst)?;
    let base = ReplicationScheme::from_sharding(&inst.sharding, space.servers).loads(&inst.graph);
    for mask in 0u32..(1u32 << space.slots.len()) {
        if space.storage_ok(&space.loads(mask, &base))
            && paths
                .iter()
                .all(|(p, t)| space.latency(mask, &p.nodes, routing) <= *t)
        {
            return Ok(Some(space.scheme(mask)));
        }
    }
    Ok(None)
}

/// Backtracking over "which server serves this whole path".
struct ZeroLatencySearch<'a> {
    inst: &'a ProblemInstance,
    paths: Vec<Vec<VertexId>>,
    allowed: Vec<Vec<ServerId>>,
    /// Paths currently relying on each non-original copy.
    uses: Vec<u32>,
    loads: Vec<Cost>,
    servers: usize,
}

impl<'a> ZeroLatencySearch<'a> {
    fn new(
        inst: &'a ProblemInstance,
        paths: &[(CausalAccessPath, usize)],
        routing: RootRouting,
    ) -> Self {
        let servers = inst.servers.len();
        let mut nodes: Vec<Vec<VertexId>> = paths.iter().map(|(p, _)| p.nodes.clone()).collect();
        // Group paths by root so conflicting placements surface early.
        nodes.sort();
        nodes.dedup();
        let allowed = nodes
            .iter()
            .map(|p| match routing {
                RootRouting::Pinned => vec![inst.sharding.server_of(p[0])],
                RootRouting::AnyCopy => inst.servers.ids().collect(),
            })
            .collect();
        ZeroLatencySearch {
            inst,
            paths: nodes,
            allowed,
            uses: vec![0; inst.graph.vertex_count() * servers],
            loads: ReplicationScheme::from_sharding(&inst.sharding, servers).loads(&inst.graph),
            servers,
        }
    }

    fn present(&self, v: VertexId, s: ServerId) -> bool {
        self.inst.sharding.server_of(v) == s || self.uses[v.index() * self.servers + s.index()] > 0
    }

    fn place(&mut self, v: VertexId, s: ServerId) {
        if self.inst.sharding.server_of(v) == s {
            return;
        }
        let slot = &mut self.uses[v.index() * self.servers + s.index()];
        if *slot == 0 {
            self.loads[s.index()] += self.inst.graph.cost(v);
        }
        *slot += 1;
    }

    fn unplace(&mut self, v: VertexId, s: ServerId) {
        if self.inst.sharding.server_of(v) == s {
            return;
        }
        let slot = &mut self.uses[v.index() * self.servers + s.index()];
        *slot -= 1;
        if *slot == 0 {
            self.loads[s.index()] -= self.inst.graph.cost(v);
        }
    }

    fn within_capacity(&self, s: ServerId) -> bool {
        self.inst.servers.capacity(s).admits(self.loads[s.index()])
    }

    fn run(mut self) -> Option<ReplicationScheme> {
        if !self.inst.servers.ids().all(|s| self.within_capacity(s)) {
            return None;
        }
        if !self.search(0) {
            return None;
        }
        let r = ReplicationScheme::from_sharding(&self.inst.sharding, self.servers);
        for v in self.inst.graph.vertices() {
            for s in self.inst.servers.ids() {
                if self.present(v, s) {
                    r.add(v, s);
                }
            }
        }
        Some(r)
    }

    fn search(&mut self, i: usize) -> bool {
        if i == self.paths.len() {
            return true;
        }
        let nodes = self.paths[i].clone();
        let allowed = self.allowed[i].clone();
        // A server that already holds the whole path costs nothing and
        // dominates every other choice.
        if allowed
            .iter()
            .any(|&s| nodes.iter().all(|&v| self.present(v, s)))
        {
            return self.search(i + 1);
        }
        for s in allowed {
            for &v in &nodes {
                self.place(v, s);
            }
            if self.within_capacity(s) && self.search(i + 1) {
                return true;
            }
            for &v in &nodes {
                self.unplace(v, s);
            }
        }
        false
    }
}

/// Every non-original access stays on its parent's server, and every replica
/// is the access location of its object on some workload path.
pub fn verify_upward(
    r: &ReplicationScheme,
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
) -> bool {
    let mut used: BTreeSet<(VertexId, ServerId)> = BTreeSet::new();
    for qt in &workload.queries {
        for p in enumerate_paths(graph, qt) {
            let at = access_locations(&p, r, sharding).0;
            for (i, &v) in p.nodes.iter().enumerate() {
                if at[i] != sharding.server_of(v) {
                    if i == 0 || at[i] != at[i - 1] {
                        return false;
                    }
                    used.insert((v, at[i]));
                }
            }
        }
    }
    graph.vertices().all(|v| {
        r.servers(v)
            .all(|s| s == sharding.server_of(v) || used.contains(&(v, s)))
    })
}

/// Simple undirected graph on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UGraph {
    pub fn new(n: usize) -> Self {
        UGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = UGraph::new(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    /// Ignores self-loops and duplicates.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_regular(&self, k: usize) -> bool {
        self.adj.iter().all(|ns| ns.len() == k)
    }

    pub fn is_connected(&self) -> bool {
        if self.adj.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !std::mem::replace(&mut seen[w], true) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Self {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn star(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (0, i)))
    }

    pub fn complete_bipartite(a: usize, b: usize) -> Self {
        Self::from_edges(a + b, (0..a).flat_map(|x| (a..a + b).map(move |y| (x, y))))
    }

    /// Two `k`-cycles joined by a perfect matching.
    pub fn prism(k: usize) -> Self {
        let mut g = Self::new(2 * k);
        for i in 0..k {
            g.add_edge(i, (i + 1) % k);
            g.add_edge(k + i, k + (i + 1) % k);
            g.add_edge(i, k + i);
        }
        g
    }

    pub fn hypercube(dim: u32) -> Self {
        let n = 1usize << dim;
        Self::from_edges(
            n,
            (0..n).flat_map(|v| (0..dim).map(move |b| (v, v ^ (1 << b)))),
        )
    }

    /// Random spanning tree plus each remaining pair with probability `p`.
    pub fn random_connected<R: Rng>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Self::new(n);
        for v in 1..n {
            g.add_edge(v, rng.gen_range(0..v));
        }
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    /// Vertices become `u0, u1, ...` with label `node`; each undirected edge
    /// becomes two `link` edges.
    pub fn to_data_graph(&self) -> DataGraph {
        let width = self.len().saturating_sub(1).to_string().len();
        let name = |v: usize| format!("u{v:0width$}");
        let mut b = GraphBuilder::new();
        for v in 0..self.len() {
            b.vertex(name(v), "node", Cost::ONE)
                .expect("distinct names");
        }
        for (a, c) in self.edges() {
            b.edge(name(a), "link", name(c));
            b.edge(name(c), "link", name(a));
        }
        b.build().expect("well-formed")
    }

    /// Forgets labels and directions; vertex `i` is the `i`-th handle.
    pub fn from_data_graph(graph: &DataGraph) -> Self {
        let mut g = Self::new(graph.vertex_count());
        for v in graph.vertices() {
            for (_, w) in graph.out_edges(v) {
                g.add_edge(v.index(), w.index());
            }
        }
        g
    }

    /// Reads a `#graph v1` stream as an undirected graph.
    pub fn load<R: BufRead>(source: R) -> Result<Self, crate::format::FormatError> {
        Ok(Self::from_data_graph(&crate::graph::load_graph(source)?))
    }

    pub fn write_to<W: Write>(&self, w: W) -> io::Result<()> {
        self.to_data_graph().write_to(w)
    }
}

/// A balanced two-way split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bisection {
    /// `true` for the second side.
    pub side: Vec<bool>,
}

impl Bisection {
    pub fn from_first_side(n: usize, first: &[usize]) -> Self {
        let mut side = vec![true; n];
        for &v in first {
            side[v] = false;
        }
        Bisection { side }
    }

    pub fn is_balanced(&self) -> bool {
        self.side.iter().filter(|&&s| s).count() * 2 == self.side.len()
    }

    /// Bridge vertices on each side.
    pub fn bridges(&self, g: &UGraph) -> (usize, usize) {
        let mut out = (0, 0);
        for v in 0..g.len() {
            if g.neighbors(v).any(|w| self.side[w] != self.side[v]) {
                if self.side[v] {
                    out.1 += 1;
                } else {
                    out.0 += 1;
                }
            }
        }
        out
    }

    pub fn cut(&self, g: &UGraph) -> usize {
        g.edges()
            .filter(|&(a, b)| self.side[a] != self.side[b])
            .count()
    }

    pub fn sides(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.side.len()).partition(|&v| !self.side[v])
    }
}

/// Every bisection once: vertex 0 is always on the first side.
fn bisections(g: &UGraph) -> Result<impl Iterator<Item = Bisection>, OracleError> {
    let n2 = g.len();
    if n2 % 2 == 1 {
        return Err(OracleError::OddVertexCount(n2));
    }
    if n2 > ENUMERATION_BUDGET {
        return Err(OracleError::OverBudget {
            what: "vertex count",
            size: n2,
            budget: ENUMERATION_BUDGET,
        });
    }
    let n = n2 / 2;
    let all: Box<dyn Iterator<Item = Vec<usize>>> = if n2 == 0 {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new(enumerate_candidates(n2 - 1, n - 1))
    };
    Ok(all.map(move |first| Bisection::from_first_side(n2, &first)))
}

/// First bisection (in lexicographic order of the side holding vertex 0) with
/// at most `k` bridge vertices on each side.
pub fn min_bridge_bisection_bf(g: &UGraph, k: usize) -> Result<Option<Bisection>, OracleError> {
    Ok(bisections(g)?.find(|b| {
        let (b1, b2) = b.bridges(g);
        b1 <= k && b2 <= k
    }))
}

/// Smallest achievable `max(bridges per side)`.
pub fn min_bridge_value(g: &UGraph) -> Result<usize, OracleError> {
    Ok(bisections(g)?
        .map(|b| {
            let (b1, b2) = b.bridges(g);
            b1.max(b2)
        })
        .min()
        .unwrap_or(0))
}

/// Smallest number of edges crossing a bisection.
pub fn min_bisection_cut(g: &UGraph) -> Result<usize, OracleError> {
    Ok(bisections(g)?.map(|b| b.cut(g)).min().unwrap_or(0))
}

/// Replication instance that is feasible exactly when `g` has a bisection with
/// at most `k` bridge vertices per side.
///
/// Each vertex `v` yields a marker `m<v>` (cost 1) and a regular object `o<v>`
/// (cost 1/(2n)). Markers of the first half sit on `s1`, the rest on `s2`;
/// each regular object sits on the other one. The query from `m<v>` reaches
/// `o<v>` and then every neighbor's regular object with bound 0.
pub fn reduce_bridge_to_replication(g: &UGraph, k: usize) -> Result<ProblemInstance, OracleError> {
    let n2 = g.len();
    if n2 % 2 == 1 || n2 == 0 {
        return Err(OracleError::OddVertexCount(n2));
    }
    let n = n2 / 2;
    let regular_cost = Cost::ratio(1, n2 as i64);
    let width = (n2 - 1).to_string().len();
    let marker = |v: usize| format!("m{v:0width$}");
    let regular = |v: usize| format!("o{v:0width$}");

    let mut b = GraphBuilder::new();
    for v in 0..n2 {
        b.vertex(marker(v), "marker", Cost::ONE).expect("distinct");
        b.vertex(regular(v), "regular", regular_cost)
            .expect("distinct");
        b.edge(marker(v), "has", regular(v));
        for w in g.neighbors(v) {
            b.edge(regular(v), "adj", regular(w));
        }
    }
    let graph = b.build().expect("well-formed");

    let half = Cost::ratio(1, 2);
    let small = Cost::from_int(n as i64) + half;
    let large = small + Cost::ratio(k as i64, n2 as i64);
    let servers = ServerSet::new(
        [
            ("s1", Capacity(Some(small))),
            ("s2", Capacity(Some(small))),
            ("s3", Capacity(Some(large))),
            ("s4", Capacity(Some(large))),
        ],
        Imbalance::Unbounded,
    )
    .expect("four distinct servers");
    let (s1, s2) = (ServerId(0), ServerId(1));
    let mut assignment = vec![s1; graph.vertex_count()];
    for v in 0..n2 {
        let (m_at, o_at) = if v < n { (s1, s2) } else { (s2, s1) };
        assignment[graph.vertex(&marker(v)).expect("present").index()] = m_at;
        assignment[graph.vertex(&regular(v)).expect("present").index()] = o_at;
    }
    let sharding = ShardingMap::from_vec(assignment);

    let bound = LatencyBound::Bounded(0);
    let workload = WorkloadSpec::new(vec![
        QueryType::new("bridge", "marker", vec![Step::new("has", "regular")], bound),
        QueryType::new(
            "bridge",
            "marker",
            vec![Step::new("has", "regular"), Step::new("adj", "regular")],
            bound,
        ),
    ]);
    Ok(ProblemInstance {
        graph,
        servers,
        sharding,
        workload,
    })
}

/// Replaces every vertex of a 3-regular graph by a triangle whose corners each
/// keep one of the original edges. Copy `3v + i` carries the edge to the
/// `i`-th neighbor of `v`.
pub fn triple_gadget(g: &UGraph) -> Result<UGraph, OracleError> {
    if let Some(v) = (0..g.len()).find(|&v| g.degree(v) != 3) {
        return Err(OracleError::NotCubic {
            vertex: v,
            degree: g.degree(v),
        });
    }
    let mut h = UGraph::new(3 * g.len());
    for v in 0..g.len() {
        h.add_edge(3 * v, 3 * v + 1);
        h.add_edge(3 * v + 1, 3 * v + 2);
        h.add_edge(3 * v, 3 * v + 2);
    }
    let slot = |v: usize, w: usize| g.neighbors(v).position(|x| x == w).expect("adjacent");
    for (a, b) in g.edges() {
        h.add_edge(3 * a + slot(a, b), 3 * b + slot(b, a));
    }
    Ok(h)
}

/// Fixed corpus of small connected graphs with an even vertex count.
pub fn bisection_corpus() -> Vec<(String, UGraph)> {
    use rand::SeedableRng;
    let mut out: Vec<(String, UGraph)> = Vec::new();
    for n in [2, 4, 6, 8] {
        out.push((format!("path{n}"), UGraph::path(n)));
        out.push((format!("complete{n}"), UGraph::complete(n)));
        out.push((format!("star{n}"), UGraph::star(n)));
        if n >= 4 {
            out.push((format!("cycle{n}"), UGraph::cycle(n)));
        }
    }
    out.push(("bipartite2x2".into(), UGraph::complete_bipartite(2, 2)));
    out.push(("bipartite1x3".into(), UGraph::complete_bipartite(1, 3)));
    out.push(("bipartite3x3".into(), UGraph::complete_bipartite(3, 3)));
    out.push(("bipartite2x4".into(), UGraph::complete_bipartite(2, 4)));
    out.push(("bipartite4x4".into(), UGraph::complete_bipartite(4, 4)));
    out.push(("prism3".into(), UGraph::prism(3)));
    out.push(("prism4".into(), UGraph::prism(4)));
    out.push(("cube".into(), UGraph::hypercube(3)));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..12 {
        let n = [4, 6, 8][i % 3];
        let p = [0.15, 0.3, 0.5][i / 4];
        out.push((
            format!("random{i}"),
            UGraph::random_connected(n, p, &mut rng),
        ));
    }
    out
}
