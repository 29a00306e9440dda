//! Query types, causal access path enumeration and redundant-path pruning.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use dashmap::DashSet;
use serde::{Serialize, Serializer};

use crate::format::{FormatError, LineReader};
use crate::graph::{DataGraph, LabelId, ServerId, ShardingMap, VertexId};

/// Upper bound `t_Q` on distributed traversals per path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LatencyBound {
    Bounded(u32),
    Unbounded,
}

impl LatencyBound {
    pub fn admits(&self, latency: usize) -> bool {
        match *self {
            LatencyBound::Bounded(t) => latency <= t as usize,
            LatencyBound::Unbounded => true,
        }
    }

    /// The bound as an integer if it can constrain a path with `hops` edges.
    pub fn effective(&self, hops: usize) -> Option<usize> {
        match *self {
            LatencyBound::Bounded(t) if (t as usize) < hops => Some(t as usize),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "inf" {
            return Ok(LatencyBound::Unbounded);
        }
        if s.starts_with('-') {
            return Err(format!("negative bound `{s}`"));
        }
        s.parse::<u32>()
            .map(LatencyBound::Bounded)
            .map_err(|_| format!("invalid bound `{s}`"))
    }
}

impl fmt::Display for LatencyBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyBound::Bounded(t) => write!(f, "{t}"),
            LatencyBound::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for LatencyBound {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            LatencyBound::Bounded(t) => serializer.serialize_u32(*t),
            LatencyBound::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub edge_label: String,
    pub vertex_label: String,
}

impl Step {
    pub fn new(edge_label: impl Into<String>, vertex_label: impl Into<String>) -> Self {
        Step {
            edge_label: edge_label.into(),
            vertex_label: vertex_label.into(),
        }
    }
}

/// A label path pattern with a latency bound. Tree-shaped queries are several
/// `QueryType`s sharing one name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryType {
    pub name: String,
    pub root_label: String,
    pub steps: Vec<Step>,
    pub bound: LatencyBound,
}

impl QueryType {
    pub fn new(
        name: impl Into<String>,
        root_label: impl Into<String>,
        steps: Vec<Step>,
        bound: LatencyBound,
    ) -> Self {
        QueryType {
            name: name.into(),
            root_label: root_label.into(),
            steps,
            bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct WorkloadSpec {
    pub queries: Vec<QueryType>,
}

impl WorkloadSpec {
    pub fn new(queries: Vec<QueryType>) -> Self {
        WorkloadSpec { queries }
    }

    /// Distinct query names in order of first appearance.
    pub fn query_names(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.queries
            .iter()
            .map(|q| q.name.as_str())
            .filter(|n| seen.insert(*n))
            .collect()
    }

    /// Same workload with every bound replaced.
    pub fn with_bound(&self, bound: LatencyBound) -> WorkloadSpec {
        WorkloadSpec {
            queries: self
                .queries
                .iter()
                .map(|q| QueryType { bound, ..q.clone() })
                .collect(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "#workload v1")?;
        let mut i = 0;
        while i < self.queries.len() {
            let q = &self.queries[i];
            writeln!(w, "Q {}", q.name)?;
            writeln!(w, "t {}", q.bound)?;
            writeln!(w, "root {}", q.root_label)?;
            while i < self.queries.len() && self.queries[i].name == q.name {
                let mut line = String::from("path");
                for s in &self.queries[i].steps {
                    line.push(' ');
                    line.push_str(&s.edge_label);
                    line.push(' ');
                    line.push_str(&s.vertex_label);
                }
                writeln!(w, "{line}")?;
                i += 1;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Parses a `#workload v1` stream.
///
/// ```text
/// Q friends_messages
/// t 1
/// root person
/// path knows person creates message
/// ```
///
/// Several `path` lines in one block describe a tree and expand to one
/// [`QueryType`] per line; a bare `path` is a single-access query.
pub fn load_workload<R: BufRead>(source: R) -> Result<WorkloadSpec, FormatError> {
    struct Block {
        line: usize,
        name: String,
        bound: Option<LatencyBound>,
        root: Option<String>,
        paths: Vec<Vec<Step>>,
    }

    let mut lines = LineReader::new(source, "workload");
    lines.expect_header("#workload v1")?;
    let mut blocks: Vec<Block> = Vec::new();
    let mut names = HashSet::new();

    while let Some((lineno, toks)) = lines.next_tokens()? {
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        if let ["Q", name] = toks.as_slice() {
            if !names.insert(name.to_string()) {
                return Err(lines.error_at(lineno, format!("duplicate query name `{name}`")));
            }
            blocks.push(Block {
                line: lineno,
                name: name.to_string(),
                bound: None,
                root: None,
                paths: Vec::new(),
            });
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            return Err(lines.error_at(lineno, "directive outside of a `Q <name>` block"));
        };
        match toks.as_slice() {
            ["t", value] => {
                if block.bound.is_some() {
                    return Err(lines.error_at(lineno, "repeated `t` directive"));
                }
                block.bound =
                    Some(LatencyBound::parse(value).map_err(|e| lines.error_at(lineno, e))?);
            }
            ["root", label] => {
                if block.root.is_some() {
                    return Err(lines.error_at(lineno, "repeated `root` directive"));
                }
                block.root = Some(label.to_string());
            }
            ["path", rest @ ..] => {
                if rest.len() % 2 != 0 {
                    return Err(
                        lines.error_at(lineno, "`path` needs (edge_label vertex_label) pairs")
                    );
                }
                block
                    .paths
                    .push(rest.chunks(2).map(|c| Step::new(c[0], c[1])).collect());
            }
            [other, ..] => {
                return Err(lines.error_at(lineno, format!("unknown directive `{other}`")));
            }
            [] => unreachable!("blank lines are skipped"),
        }
    }

    let mut queries = Vec::new();
    for b in blocks {
        let bound = b.bound.ok_or_else(|| {
            lines.error_at(b.line, format!("query `{}` has no `t` directive", b.name))
        })?;
        let root = b.root.ok_or_else(|| {
            lines.error_at(
                b.line,
                format!("query `{}` has no `root` directive", b.name),
            )
        })?;
        if b.paths.is_empty() {
            return Err(lines.error_at(b.line, format!("query `{}` has no `path` line", b.name)));
        }
        for steps in b.paths {
            queries.push(QueryType::new(b.name.clone(), root.clone(), steps, bound));
        }
    }
    Ok(WorkloadSpec { queries })
}

/// A root-to-leaf sequence of causally dependent accesses; `nodes[i]` is the
/// parent of `nodes[i + 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CausalAccessPath {
    pub nodes: Vec<VertexId>,
}

impl CausalAccessPath {
    pub fn new(nodes: Vec<VertexId>) -> Self {
        CausalAccessPath { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> VertexId {
        self.nodes[0]
    }

    /// Number of edges.
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn names<'g>(&self, graph: &'g DataGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|&v| graph.name(v)).collect()
    }

    /// Checks the label/edge pattern of `qt` against the graph.
    pub fn matches(&self, graph: &DataGraph, qt: &QueryType) -> bool {
        if self.nodes.len() != qt.steps.len() + 1 {
            return false;
        }
        if graph.label_name(graph.label(self.nodes[0])) != qt.root_label {
            return false;
        }
        qt.steps.iter().enumerate().all(|(i, step)| {
            let (src, dst) = (self.nodes[i], self.nodes[i + 1]);
            graph.label_name(graph.label(dst)) == step.vertex_label
                && graph
                    .label_id(&step.edge_label)
                    .is_some_and(|l| graph.has_edge(src, l, dst))
        })
    }
}

/// Lazy depth-first expansion of a query type's label pattern.
pub struct PathIter<'g> {
    graph: &'g DataGraph,
    root_label: Option<LabelId>,
    steps: Option<Vec<(LabelId, LabelId)>>,
    next_root: u32,
    root_end: u32,
    stack: Vec<(VertexId, usize)>,
}

impl<'g> PathIter<'g> {
    fn new(graph: &'g DataGraph, qt: &QueryType, roots: std::ops::Range<u32>) -> Self {
        let steps: Option<Vec<_>> = qt
            .steps
            .iter()
            .map(|s| {
                Some((
                    graph.label_id(&s.edge_label)?,
                    graph.label_id(&s.vertex_label)?,
                ))
            })
            .collect();
        PathIter {
            graph,
            root_label: graph.label_id(&qt.root_label),
            steps,
            next_root: roots.start,
            root_end: roots.end,
            stack: Vec::new(),
        }
    }

    fn current(&self) -> CausalAccessPath {
        CausalAccessPath::new(self.stack.iter().map(|&(v, _)| v).collect())
    }
}

impl Iterator for PathIter<'_> {
    type Item = CausalAccessPath;

    fn next(&mut self) -> Option<CausalAccessPath> {
        let root_label = self.root_label?;
        let steps = self.steps.as_ref()?;
        loop {
            if self.stack.is_empty() {
                let root = loop {
                    if self.next_root >= self.root_end {
                        return None;
                    }
                    let v = VertexId(self.next_root);
                    self.next_root += 1;
                    if self.graph.label(v) == root_label {
                        break v;
                    }
                };
                self.stack.push((root, 0));
            }
            let depth = self.stack.len() - 1;
            if depth == steps.len() {
                let path = self.current();
                self.stack.pop();
                return Some(path);
            }
            let (edge_label, vertex_label) = steps[depth];
            let (v, cursor) = *self.stack.last().expect("non-empty");
            let edges = self.graph.out_edges(v);
            let found = edges[cursor..]
                .iter()
                .position(|&(l, d)| l == edge_label && self.graph.label(d) == vertex_label);
            match found {
                Some(offset) => {
                    let idx = cursor + offset;
                    self.stack.last_mut().expect("non-empty").1 = idx + 1;
                    self.stack.push((edges[idx].1, 0));
                }
                None => {
                    self.stack.pop();
                }
            }
        }
    }
}

/// All paths matching `qt`: roots ascending by vertex id, neighbours in
/// adjacency order. Labels missing from the graph yield nothing.
pub fn enumerate_paths<'g>(graph: &'g DataGraph, qt: &QueryType) -> PathIter<'g> {
    PathIter::new(graph, qt, 0..graph.vertex_count() as u32)
}

/// Paths of `qt` starting at `root` only; used to split enumeration across
/// workers by root.
pub fn enumerate_paths_from<'g>(
    graph: &'g DataGraph,
    qt: &QueryType,
    root: VertexId,
) -> PathIter<'g> {
    PathIter::new(graph, qt, root.0..root.0 + 1)
}

/// Vertices carrying the root label of `qt`, ascending.
pub fn roots(graph: &DataGraph, qt: &QueryType) -> Vec<VertexId> {
    match graph.label_id(&qt.root_label) {
        Some(l) => graph.vertices().filter(|&v| graph.label(v) == l).collect(),
        None => Vec::new(),
    }
}

/// Equivalence key for pruning: the root's server plus the non-root nodes.
pub type ClassKey = (ServerId, Vec<VertexId>);

pub fn class_key(path: &CausalAccessPath, sharding: &ShardingMap) -> ClassKey {
    (sharding.server_of(path.root()), path.nodes[1..].to_vec())
}

/// Keeps the first path of every `(d(root), tail)` class.
#[derive(Default, Debug)]
pub struct PathPruner {
    seen: HashSet<ClassKey>,
}

impl PathPruner {
    pub fn new() -> Self {
        Self::default()
    }

    /// True iff this is the first path of its class.
    pub fn admit(&mut self, path: &CausalAccessPath, sharding: &ShardingMap) -> bool {
        self.seen.insert(class_key(path, sharding))
    }
}

/// Thread-safe variant of [`PathPruner`] with insert-if-absent semantics.
#[derive(Default, Debug)]
pub struct ConcurrentPruner {
    seen: DashSet<ClassKey>,
}

impl ConcurrentPruner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&self, path: &CausalAccessPath, sharding: &ShardingMap) -> bool {
        self.seen.insert(class_key(path, sharding))
    }
}

/// Drops paths that differ from an earlier path only in a root placed on the
/// same server.
pub fn prune_paths<'a, I>(
    paths: I,
    sharding: &'a ShardingMap,
) -> impl Iterator<Item = CausalAccessPath> + 'a
where
    I: IntoIterator<Item = CausalAccessPath>,
    I::IntoIter: 'a,
{
    let mut pruner = PathPruner::new();
    paths.into_iter().filter(move |p| pruner.admit(p, sharding))
}
