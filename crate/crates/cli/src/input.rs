use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use latbound::graph::{hash_shard, load_graph, load_servers, load_sharding};
use latbound::oracle::{ProblemInstance, UGraph};
use latbound::workload::{load_workload, LatencyBound, WorkloadSpec};
use latbound::{DataGraph, Imbalance, ServerSet, ShardingMap};

use crate::args::{Deployment, GraphSource};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn graph(path: &Path) -> Result<DataGraph> {
    load_graph(open(path)?).with_context(|| path.display().to_string())
}

pub fn workload(path: &Path) -> Result<WorkloadSpec> {
    load_workload(open(path)?).with_context(|| path.display().to_string())
}

pub struct Loaded {
    pub graph: DataGraph,
    pub servers: ServerSet,
    pub sharding: ShardingMap,
}

impl Deployment {
    /// Epsilon precedence: flag, then the servers file, then the default.
    pub fn load(&self) -> Result<Loaded> {
        let graph = graph(&self.graph)?;
        let mut servers = load_servers(open(&self.servers)?)
            .with_context(|| self.servers.display().to_string())?;
        if let Some(flag) = &self.epsilon {
            let eps = Imbalance::parse_flag(flag).map_err(|e| anyhow!("--epsilon {flag}: {e}"))?;
            servers.set_imbalance(eps);
        }
        let sharding = match (&self.placement.shard, self.placement.hash_seed) {
            (Some(path), _) => load_sharding(open(path)?, &graph, &servers)
                .with_context(|| path.display().to_string())?,
            (None, Some(seed)) => hash_shard(&graph, &servers, seed),
            (None, None) => bail!("one of --shard or --hash-seed is required"),
        };
        Ok(Loaded {
            graph,
            servers,
            sharding,
        })
    }

    pub fn instance(&self, workload_path: &Path) -> Result<ProblemInstance> {
        let Loaded {
            graph,
            servers,
            sharding,
        } = self.load()?;
        Ok(ProblemInstance {
            workload: workload(workload_path)?,
            graph,
            servers,
            sharding,
        })
    }
}

pub fn bounds(list: &str) -> Result<Vec<LatencyBound>> {
    list.split(',')
        .map(|s| LatencyBound::parse(s.trim()).map_err(|e| anyhow!("bad latency bound `{s}`: {e}")))
        .collect()
}

/// The graph plus a display name per vertex.
pub fn undirected(source: &GraphSource) -> Result<(UGraph, Vec<String>)> {
    if let Some(path) = &source.input {
        let g = graph(path)?;
        let names = g.vertices().map(|v| g.name(v).to_string()).collect();
        return Ok((UGraph::from_data_graph(&g), names));
    }
    let text = source.family.as_deref().unwrap_or_default();
    let g = family(text)?;
    let dg = g.to_data_graph();
    let names = dg.vertices().map(|v| dg.name(v).to_string()).collect();
    Ok((g, names))
}

fn family(text: &str) -> Result<UGraph> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("graph family must look like `cycle:6`, got `{text}`"))?;
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .with_context(|| format!("bad size in `{text}`"))
    };
    let at_least = |n: usize, min: usize| {
        if n < min {
            bail!("`{text}` needs a size of at least {min}");
        }
        Ok(n)
    };
    Ok(match kind {
        "cycle" => UGraph::cycle(at_least(num(arg)?, 3)?),
        "path" => UGraph::path(num(arg)?),
        "complete" => UGraph::complete(num(arg)?),
        "star" => UGraph::star(num(arg)?),
        "prism" => UGraph::prism(at_least(num(arg)?, 3)?),
        "hypercube" => UGraph::hypercube(num(arg)? as u32),
        "bipartite" => {
            let (a, b) = arg
                .split_once(',')
                .ok_or_else(|| anyhow!("bipartite needs `A,B`"))?;
            UGraph::complete_bipartite(num(a)?, num(b)?)
        }
        _ => bail!("unknown graph family `{kind}`"),
    })
}
