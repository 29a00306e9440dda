use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::cost::Cost;
use crate::format::{FormatError, LineReader};

/// Dense handle of a vertex. Handles are assigned in ascending order of the
/// external vertex id, so iteration order equals id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Interned vertex or edge label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("edge `{src} {label} {dst}` references undeclared vertex `{missing}`")]
    DanglingEdge {
        src: String,
        label: String,
        dst: String,
        missing: String,
    },
    #[error("every vertex has storage cost 0; at least one must be positive")]
    AllZeroCost,
}

/// A labeled directed graph of objects. Each object is a vertex plus its
/// adjacency list and carries a single storage cost.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DataGraph {
    names: Vec<String>,
    index: HashMap<String, VertexId>,
    labels: Vec<LabelId>,
    costs: Vec<Cost>,
    adjacency: Vec<Vec<(LabelId, VertexId)>>,
    label_names: Vec<String>,
    label_index: HashMap<String, LabelId>,
}

impl DataGraph {
    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = VertexId> + '_ {
        (0..self.names.len() as u32).map(VertexId)
    }

    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v.index()]
    }

    pub fn label(&self, v: VertexId) -> LabelId {
        self.labels[v.index()]
    }

    pub fn label_name(&self, l: LabelId) -> &str {
        &self.label_names[l.0 as usize]
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.label_index.get(name).copied()
    }

    pub fn cost(&self, v: VertexId) -> Cost {
        self.costs[v.index()]
    }

    pub fn total_cost(&self) -> Cost {
        self.costs.iter().sum()
    }

    /// Outgoing edges in the order they were declared.
    pub fn out_edges(&self, v: VertexId) -> &[(LabelId, VertexId)] {
        &self.adjacency[v.index()]
    }

    pub fn has_edge(&self, src: VertexId, label: LabelId, dst: VertexId) -> bool {
        self.out_edges(src)
            .iter()
            .any(|&(l, d)| l == label && d == dst)
    }

    /// Serializes in the `#graph v1` format. Vertices are written in id order
    /// and edges in adjacency order, so parse(write(g)) == g.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "#graph v1")?;
        for v in self.vertices() {
            writeln!(
                w,
                "V {} {} {}",
                self.name(v),
                self.label_name(self.label(v)),
                self.cost(v)
            )?;
        }
        for v in self.vertices() {
            for &(l, dst) in self.out_edges(v) {
                writeln!(
                    w,
                    "E {} {} {}",
                    self.name(v),
                    self.label_name(l),
                    self.name(dst)
                )?;
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

/// Incremental construction with validation at [`GraphBuilder::build`].
#[derive(Default, Debug)]
pub struct GraphBuilder {
    vertices: Vec<(String, String, Cost)>,
    seen: HashMap<String, usize>,
    edges: Vec<(String, String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(
        &mut self,
        name: impl Into<String>,
        label: impl Into<String>,
        cost: Cost,
    ) -> Result<&mut Self, GraphError> {
        let name = name.into();
        if self.seen.contains_key(&name) {
            return Err(GraphError::DuplicateVertex(name));
        }
        self.seen.insert(name.clone(), self.vertices.len());
        self.vertices.push((name, label.into(), cost));
        Ok(self)
    }

    pub fn edge(
        &mut self,
        src: impl Into<String>,
        label: impl Into<String>,
        dst: impl Into<String>,
    ) -> &mut Self {
        self.edges.push((src.into(), label.into(), dst.into()));
        self
    }

    pub fn build(self) -> Result<DataGraph, GraphError> {
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&a, &b| self.vertices[a].0.cmp(&self.vertices[b].0));

        let mut g = DataGraph::default();
        for &i in &order {
            let (name, label, cost) = &self.vertices[i];
            let id = VertexId(g.names.len() as u32);
            g.index.insert(name.clone(), id);
            g.names.push(name.clone());
            let l = intern(&mut g, label);
            g.labels.push(l);
            g.costs.push(*cost);
            g.adjacency.push(Vec::new());
        }
        if !g.costs.is_empty() && g.costs.iter().all(Cost::is_zero) {
            return Err(GraphError::AllZeroCost);
        }
        let mut pending: Vec<Vec<(String, VertexId)>> = vec![Vec::new(); g.names.len()];
        for (src, label, dst) in self.edges {
            let missing = if !g.index.contains_key(&src) {
                Some(src.clone())
            } else if !g.index.contains_key(&dst) {
                Some(dst.clone())
            } else {
                None
            };
            if let Some(missing) = missing {
                return Err(GraphError::DanglingEdge {
                    src,
                    label,
                    dst,
                    missing,
                });
            }
            pending[g.index[&src].index()].push((label, g.index[&dst]));
        }
        // Edge labels are interned in (source id, adjacency) order so that the
        // interning is independent of line order in the source file. Repeated
        // edges collapse into one.
        for (s, edges) in pending.into_iter().enumerate() {
            for (label, d) in edges {
                let l = intern(&mut g, &label);
                if !g.adjacency[s].contains(&(l, d)) {
                    g.adjacency[s].push((l, d));
                }
            }
        }
        Ok(g)
    }
}

fn intern(g: &mut DataGraph, label: &str) -> LabelId {
    if let Some(&l) = g.label_index.get(label) {
        return l;
    }
    let l = LabelId(g.label_names.len() as u32);
    g.label_names.push(label.to_string());
    g.label_index.insert(label.to_string(), l);
    l
}

/// Parses a `#graph v1` stream. Edge lines may precede the vertex lines they
/// reference; dangling endpoints are reported with the edge's line number.
pub fn load_graph<R: BufRead>(source: R) -> Result<DataGraph, FormatError> {
    let mut lines = LineReader::new(source, "graph");
    lines.expect_header("#graph v1")?;
    let mut builder = GraphBuilder::new();
    let mut edge_lines = Vec::new();
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        match toks.as_slice() {
            ["V", name, label] => {
                builder
                    .vertex(*name, *label, Cost::ONE)
                    .map_err(|e| lines.error_at(lineno, e.to_string()))?;
            }
            ["V", name, label, cost] => {
                let cost: Cost = cost.parse().map_err(|e: crate::cost::CostParseError| {
                    lines.error_at(lineno, e.to_string())
                })?;
                builder
                    .vertex(*name, *label, cost)
                    .map_err(|e| lines.error_at(lineno, e.to_string()))?;
            }
            ["E", src, label, dst] => {
                edge_lines.push((lineno, src.to_string(), dst.to_string()));
                builder.edge(*src, *label, *dst);
            }
            _ => return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" ")))),
        }
    }
    builder.build().map_err(|e| match &e {
        GraphError::DanglingEdge {
            missing, src, dst, ..
        } => {
            let lineno = edge_lines
                .iter()
                .find(|(_, s, d)| s == src && d == dst && (s == missing || d == missing))
                .map(|(n, _, _)| *n)
                .unwrap_or(0);
            lines.error_at(lineno, e.to_string())
        }
        _ => lines.error_at(0, e.to_string()),
    })
}
