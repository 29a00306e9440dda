//! Seeded instance generators. Equal parameters and seed give equal output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{Capacity, Cost, Imbalance};
use crate::graph::{hash_shard, DataGraph, GraphBuilder, ServerId, ServerSet, ShardingMap};
use crate::oracle::ProblemInstance;
use crate::workload::{LatencyBound, QueryType, Step, WorkloadSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct RandomParams {
    pub vertices: usize,
    pub servers: usize,
    pub query_types: usize,
    pub vertex_labels: usize,
    pub edge_labels: usize,
    /// Mean out-degree.
    pub degree: f64,
    pub max_hops: usize,
    pub max_cost: i64,
    /// Bounds drawn uniformly per query type.
    pub bounds: Vec<LatencyBound>,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            vertices: 50,
            servers: 4,
            query_types: 3,
            vertex_labels: 3,
            edge_labels: 2,
            degree: 2.0,
            max_hops: 3,
            max_cost: 4,
            bounds: vec![
                LatencyBound::Bounded(0),
                LatencyBound::Bounded(1),
                LatencyBound::Bounded(2),
            ],
        }
    }
}

fn random_graph(p: &RandomParams, rng: &mut ChaCha8Rng) -> DataGraph {
    let width = p.vertices.saturating_sub(1).to_string().len();
    let name = |i: usize| format!("v{i:0width$}");
    let mut b = GraphBuilder::new();
    for i in 0..p.vertices {
        let label = format!("L{}", rng.gen_range(0..p.vertex_labels.max(1)));
        b.vertex(
            name(i),
            label,
            Cost::from_int(rng.gen_range(1..=p.max_cost.max(1))),
        )
        .expect("distinct names");
    }
    if p.vertices > 1 {
        let edges = (p.vertices as f64 * p.degree).round() as usize;
        for _ in 0..edges {
            let a = rng.gen_range(0..p.vertices);
            let mut c = rng.gen_range(0..p.vertices - 1);
            if c >= a {
                c += 1;
            }
            let label = format!("e{}", rng.gen_range(0..p.edge_labels.max(1)));
            b.edge(name(a), label, name(c));
        }
    }
    b.build().expect("well-formed")
}

/// A label pattern read off a random walk, so at least one path matches.
fn walk_query(
    graph: &DataGraph,
    name: String,
    max_hops: usize,
    bound: LatencyBound,
    rng: &mut ChaCha8Rng,
) -> QueryType {
    let vertices: Vec<_> = graph.vertices().collect();
    let mut v = *vertices.choose(rng).expect("non-empty graph");
    let root_label = graph.label_name(graph.label(v)).to_string();
    let hops = rng.gen_range(1..=max_hops.max(1));
    let mut steps = Vec::new();
    for _ in 0..hops {
        let Some(&(l, w)) = graph.out_edges(v).choose(rng) else {
            break;
        };
        steps.push(Step::new(
            graph.label_name(l),
            graph.label_name(graph.label(w)),
        ));
        v = w;
    }
    QueryType::new(name, root_label, steps, bound)
}

/// Uniform unbounded servers with balance disabled.
pub fn open_servers(count: usize) -> ServerSet {
    ServerSet::uniform(count, Imbalance::Unbounded).expect("at least one server")
}

pub fn random_instance(p: &RandomParams, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_graph(p, &mut rng);
    let queries = (0..p.query_types)
        .map(|i| {
            let bound = *p
                .bounds
                .choose(&mut rng)
                .unwrap_or(&LatencyBound::Unbounded);
            walk_query(&graph, format!("q{i}"), p.max_hops, bound, &mut rng)
        })
        .collect();
    let servers = open_servers(p.servers);
    let sharding = hash_shard(&graph, &servers, seed);
    ProblemInstance {
        graph,
        servers,
        sharding,
        workload: WorkloadSpec::new(queries),
    }
}

/// At most 8 vertices on 3 servers (within the exhaustive budget), with
/// random capacities: some servers unbounded, others a little above their
/// original load. Balance is disabled.
pub fn tiny_instance(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = RandomParams {
        vertices: rng.gen_range(3..=8),
        servers: 3,
        query_types: rng.gen_range(1..=2),
        vertex_labels: 2,
        edge_labels: 1,
        degree: rng.gen_range(1.0..2.5),
        max_hops: 3,
        max_cost: 3,
        bounds: vec![LatencyBound::Bounded(0), LatencyBound::Bounded(1)],
    };
    let graph = random_graph(&params, &mut rng);
    let queries = (0..params.query_types)
        .map(|i| {
            let bound = *params.bounds.choose(&mut rng).expect("non-empty");
            walk_query(&graph, format!("q{i}"), params.max_hops, bound, &mut rng)
        })
        .collect();
    let sharding = ShardingMap::from_vec(
        graph
            .vertices()
            .map(|_| ServerId(rng.gen_range(0..3)))
            .collect(),
    );
    let mut loads = [Cost::ZERO; 3];
    for v in graph.vertices() {
        loads[sharding.server_of(v).index()] += graph.cost(v);
    }
    let caps: Vec<(String, Capacity)> = (0..3)
        .map(|s| {
            let cap = if rng.gen_bool(0.5) {
                Capacity::UNBOUNDED
            } else {
                Capacity(Some(loads[s] + Cost::from_int(rng.gen_range(0..=3))))
            };
            (format!("s{s}"), cap)
        })
        .collect();
    ProblemInstance {
        graph,
        servers: ServerSet::new(caps, Imbalance::Unbounded).expect("three servers"),
        sharding,
        workload: WorkloadSpec::new(queries),
    }
}

/// A small social network: persons who know each other and create posts,
/// comments replying to posts, and tags on posts.
///
/// Query types: `friends` (t=0), `friend_posts` (t=1) and `post_thread`
/// (t=2).
///
/// # Panics
///
/// If `persons < 2`.
pub fn snb_toy(persons: usize, servers: usize, seed: u64) -> ProblemInstance {
    assert!(persons >= 2, "snb_toy needs at least two persons");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    let person = |i: usize| format!("person{i:03}");
    let post = |i: usize| format!("post{i:03}");
    let comment = |i: usize| format!("comment{i:03}");
    let tag = |i: usize| format!("tag{i:02}");

    let tags = (persons / 4).max(2);
    for i in 0..tags {
        b.vertex(tag(i), "tag", Cost::ONE).expect("distinct");
    }
    for i in 0..persons {
        b.vertex(person(i), "person", Cost::from_int(4))
            .expect("distinct");
    }
    let mut posts = 0;
    let mut comments = 0;
    for i in 0..persons {
        for _ in 0..rng.gen_range(1..=3) {
            let j = rng.gen_range(0..persons - 1);
            let j = if j >= i { j + 1 } else { j };
            b.edge(person(i), "knows", person(j));
        }
        for _ in 0..rng.gen_range(0..=2) {
            b.vertex(post(posts), "post", Cost::from_int(rng.gen_range(2..=6)))
                .expect("distinct");
            b.edge(person(i), "creates", post(posts));
            b.edge(post(posts), "hasTag", tag(rng.gen_range(0..tags)));
            posts += 1;
        }
    }
    for _ in 0..posts {
        let target = rng.gen_range(0..posts);
        let author = rng.gen_range(0..persons);
        b.vertex(comment(comments), "comment", Cost::ONE)
            .expect("distinct");
        b.edge(comment(comments), "replyOf", post(target));
        b.edge(comment(comments), "hasCreator", person(author));
        comments += 1;
    }
    let graph = b.build().expect("well-formed");

    let workload = WorkloadSpec::new(vec![
        QueryType::new(
            "friends",
            "person",
            vec![Step::new("knows", "person")],
            LatencyBound::Bounded(0),
        ),
        QueryType::new(
            "friend_posts",
            "person",
            vec![Step::new("knows", "person"), Step::new("creates", "post")],
            LatencyBound::Bounded(1),
        ),
        QueryType::new(
            "post_thread",
            "comment",
            vec![Step::new("replyOf", "post"), Step::new("hasTag", "tag")],
            LatencyBound::Bounded(2),
        ),
    ]);
    let servers = open_servers(servers);
    let sharding = hash_shard(&graph, &servers, seed);
    ProblemInstance {
        graph,
        servers,
        sharding,
        workload,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::enumerate_paths;

    #[test]
    fn deterministic_for_a_seed() {
        let p = RandomParams::default();
        let a = random_instance(&p, 7);
        let b = random_instance(&p, 7);
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.sharding, b.sharding);
        assert_eq!(a.workload, b.workload);
        assert_ne!(random_instance(&p, 8).graph, a.graph);
    }

    #[test]
    fn walk_queries_match_something() {
        for seed in 0..20 {
            let inst = random_instance(&RandomParams::default(), seed);
            for qt in &inst.workload.queries {
                assert!(
                    enumerate_paths(&inst.graph, qt).next().is_some(),
                    "seed {seed} {qt:?}"
                );
            }
        }
    }

    #[test]
    fn tiny_instances_fit_the_budget() {
        for seed in 0..50 {
            let inst = tiny_instance(seed);
            assert!(
                inst.graph.vertex_count() * (inst.servers.len() - 1)
                    <= crate::oracle::ENUMERATION_BUDGET
            );
        }
    }

    #[test]
    fn snb_toy_has_mixed_bounds() {
        let inst = snb_toy(20, 4, 1);
        let bounds: std::collections::BTreeSet<String> = inst
            .workload
            .queries
            .iter()
            .map(|q| q.bound.to_string())
            .collect();
        assert_eq!(inst.workload.query_names().len(), 3);
        assert_eq!(bounds.len(), 3);
        for qt in &inst.workload.queries {
            assert!(
                enumerate_paths(&inst.graph, qt).next().is_some(),
                "{}",
                qt.name
            );
        }
    }
}
