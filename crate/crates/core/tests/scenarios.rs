use latbound::graph::{load_graph, load_servers, load_sharding};
use latbound::oracle::{
    bisection_corpus, brute_force_feasible, brute_force_optimal, min_bridge_bisection_bf,
    reduce_bridge_to_replication, ProblemInstance, RootRouting, UGraph,
};
use latbound::planner::{greedy_plan, PlannerConfig};
use latbound::report::replication_overhead;
use latbound::routing::{query_latency, validate_workload, ValidateOptions};
use latbound::workload::{enumerate_paths, load_workload, LatencyBound};
use latbound::{Cost, ReplicationScheme};

const SOCIAL: &str = "#graph v1
V Alice person
V Bob person
V Charlie person
V m1 message
V m2 message
V m3 message
E Alice knows Bob
E Alice knows Charlie
E Bob creates m1
E Charlie creates m2
E Charlie creates m3
";

const SPLIT: &str = "#shard v1
Alice s0
Bob s1
Charlie s0
m1 s1
m2 s0
m3 s0
";

fn social(t: &str) -> ProblemInstance {
    let graph = load_graph(SOCIAL.as_bytes()).unwrap();
    let servers = load_servers("#servers v1\ns0\ns1\nepsilon abs inf\n".as_bytes()).unwrap();
    let sharding = load_sharding(SPLIT.as_bytes(), &graph, &servers).unwrap();
    let workload = load_workload(
        format!("#workload v1\nQ friend_messages\nt {t}\nroot person\npath knows person creates message\n").as_bytes(),
    )
    .unwrap();
    ProblemInstance {
        graph,
        servers,
        sharding,
        workload,
    }
}

#[test]
fn social_split_query_latency() {
    let inst = social("inf");
    let r = ReplicationScheme::from_sharding(&inst.sharding, 2);
    let qt = &inst.workload.queries[0];
    let paths: Vec<_> = enumerate_paths(&inst.graph, qt).collect();
    assert_eq!(paths.len(), 3);
    assert_eq!(query_latency(&paths, &r, &inst.sharding), 1);

    let all_s0 = latbound::ShardingMap::single(&inst.graph, latbound::ServerId(0));
    let r0 = ReplicationScheme::from_sharding(&all_s0, 2);
    assert_eq!(query_latency(&paths, &r0, &all_s0), 0);
}

#[test]
fn social_split_zero_latency_matches_the_optimum() {
    let inst = social("0");
    let out = greedy_plan(
        &inst.graph,
        &inst.workload,
        &inst.sharding,
        &inst.servers,
        PlannerConfig::default(),
    );
    assert!(out.status.is_ok());
    let (added, overhead) = replication_overhead(&inst.graph, &out.scheme);
    // Bob and m1 both follow Alice to s0.
    assert_eq!(added, Cost::from_int(2));
    assert_eq!(overhead, 2.0 / 6.0);
    let opt = brute_force_optimal(&inst, None).unwrap().unwrap();
    assert_eq!(opt.added_cost, added);
}

#[test]
fn cross_server_path_is_reported() {
    let graph =
        load_graph("#graph v1\nV a x\nV b x\nV c x\nV d x\nE a r b\nE b r c\nE c r d\n".as_bytes())
            .unwrap();
    let servers = load_servers("#servers v1\ns0\ns1\n".as_bytes()).unwrap();
    let sharding = load_sharding(
        "#shard v1\na s0\nb s1\nc s0\nd s1\n".as_bytes(),
        &graph,
        &servers,
    )
    .unwrap();
    let workload =
        load_workload("#workload v1\nQ chain\nt 0\nroot x\npath r x r x r x\n".as_bytes()).unwrap();
    let r = ReplicationScheme::from_sharding(&sharding, 2);
    let v = validate_workload(
        &graph,
        &workload,
        &sharding,
        &servers,
        &r,
        ValidateOptions::default(),
    );
    assert!(!v.ok);
    assert_eq!(v.latency_violations, 1);
    assert_eq!(v.violating_paths[0].path, ["a", "b", "c", "d"]);
    assert_eq!(v.violating_paths[0].latency, 3);

    let relaxed = workload.with_bound(LatencyBound::Unbounded);
    let v = validate_workload(
        &graph,
        &relaxed,
        &sharding,
        &servers,
        &r,
        ValidateOptions::default(),
    );
    assert!(v.ok);
}

#[test]
fn generous_bridge_budget_is_always_feasible() {
    for (name, g) in bisection_corpus() {
        let half = g.len() / 2;
        let inst = reduce_bridge_to_replication(&g, half).unwrap();
        assert!(
            min_bridge_bisection_bf(&g, half).unwrap().is_some(),
            "{name}"
        );
        assert!(
            brute_force_feasible(&inst, RootRouting::AnyCopy)
                .unwrap()
                .is_some(),
            "{name}"
        );
    }
}

#[test]
fn reduction_of_a_cycle_tracks_bisection() {
    let g = UGraph::cycle(6);
    for k in 0..=3 {
        let inst = reduce_bridge_to_replication(&g, k).unwrap();
        let feasible = brute_force_feasible(&inst, RootRouting::AnyCopy)
            .unwrap()
            .is_some();
        assert_eq!(feasible, k >= 2, "K={k}");
    }
}
