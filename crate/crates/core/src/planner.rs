//! Greedy latency-bound replication.
//!
//! Paths are processed one at a time. For a path whose subpaths under the
//! sharding exceed its bound, every choice of `t + 1` retained subpaths
//! (always including the first) is a candidate; the subpaths that are not
//! retained are folded into their retained predecessor by replicating their
//! objects onto the original servers of everything before them in the merged
//! segment. The cheapest feasible candidate is committed.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::Cost;
use crate::graph::{DataGraph, ReplicationScheme, ServerId, ServerSet, ShardingMap, VertexId};
use crate::reshard::ReshardingMap;
use crate::routing::{subpaths_under_sharding, SubpathDecomposition};
use crate::workload::{
    class_key, enumerate_paths, enumerate_paths_from, roots, CausalAccessPath, ClassKey,
    WorkloadSpec,
};

/// When the load-balance constraint is enforced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceCheck {
    /// Every candidate must leave the loads balanced.
    #[default]
    PerCandidate,
    /// Only the final scheme is checked.
    FinalOnly,
}

impl FromStr for BalanceCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per-candidate" => Ok(BalanceCheck::PerCandidate),
            "final-only" => Ok(BalanceCheck::FinalOnly),
            _ => Err(format!(
                "unknown balance check `{s}` (expected per-candidate or final-only)"
            )),
        }
    }
}

impl fmt::Display for BalanceCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BalanceCheck::PerCandidate => "per-candidate",
            BalanceCheck::FinalOnly => "final-only",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    /// Rank all candidates by cost first, then check feasibility in that order.
    pub two_pass: bool,
    /// Single worker, stable order.
    pub deterministic: bool,
    pub workers: usize,
    pub balance_check: BalanceCheck,
    /// Skip paths equivalent to an earlier one (same root server, same tail).
    pub prune: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            two_pass: true,
            deterministic: true,
            workers: 1,
            balance_check: BalanceCheck::PerCandidate,
            prune: true,
        }
    }
}

impl PlannerConfig {
    fn parallel(&self) -> bool {
        !self.deterministic && self.workers > 1
    }
}

/// Lexicographic stream of `{0} ∪ S` for every `t`-subset `S` of `{1..=h}`.
/// `t` is capped at `h`.
#[derive(Clone, Debug)]
pub struct Candidates {
    h: usize,
    next: Option<Vec<usize>>,
}

pub fn enumerate_candidates(h: usize, t: usize) -> Candidates {
    let t = t.min(h);
    Candidates {
        h,
        next: Some((1..=t).collect()),
    }
}

impl Iterator for Candidates {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let t = cur.len();
        let mut succ = cur.clone();
        if let Some(i) = (0..t).rev().find(|&i| succ[i] < self.h - (t - 1 - i)) {
            succ[i] += 1;
            for k in i + 1..t {
                succ[k] = succ[k - 1] + 1;
            }
            self.next = Some(succ);
        }
        let mut out = Vec::with_capacity(t + 1);
        out.push(0);
        out.extend(cur);
        Some(out)
    }
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub selected: Vec<usize>,
    pub staged: Vec<(VertexId, ServerId)>,
    pub cost: Cost,
}

/// Replicas a candidate needs on top of `r`.
pub fn stage_candidate(
    selected: &[usize],
    p: &CausalAccessPath,
    r: &ReplicationScheme,
    subpaths: &SubpathDecomposition,
    d: &ShardingMap,
    graph: &DataGraph,
) -> Candidate {
    debug_assert_eq!(selected.first(), Some(&0));
    let ranges = &subpaths.ranges;
    let mut staged: Vec<(VertexId, ServerId)> = Vec::new();
    let mut cost = Cost::ZERO;
    let mut sel = 0;
    for i in 1..ranges.len() {
        if sel + 1 < selected.len() && selected[sel + 1] == i {
            sel += 1;
            continue;
        }
        let j = selected[sel];
        for &v in &p.nodes[ranges[i].clone()] {
            for &u in &p.nodes[ranges[j].start..ranges[i].start] {
                let s = d.server_of(u);
                if !r.contains(v, s) && !staged.contains(&(v, s)) {
                    staged.push((v, s));
                    cost += graph.cost(v);
                }
            }
        }
    }
    Candidate {
        selected: selected.to_vec(),
        staged,
        cost,
    }
}

/// Capacity, and balance when `check` asks for it, after applying `c`.
pub fn candidate_feasible(
    c: &Candidate,
    graph: &DataGraph,
    servers: &ServerSet,
    loads: &[Cost],
    check: BalanceCheck,
) -> bool {
    let mut after = loads.to_vec();
    for &(v, s) in &c.staged {
        after[s.index()] += graph.cost(v);
    }
    let capacity_ok = servers
        .ids()
        .all(|s| servers.capacity(s).admits(after[s.index()]));
    capacity_ok && (check == BalanceCheck::FinalOnly || servers.imbalance().admits(&after))
}

/// Node ranges of the merged segments a candidate produces.
pub fn candidate_segments(
    selected: &[usize],
    subpaths: &SubpathDecomposition,
) -> Vec<Range<usize>> {
    let ranges = &subpaths.ranges;
    let end = ranges.last().map_or(0, |r| r.end);
    selected
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let stop = selected.get(k + 1).map_or(end, |&n| ranges[n].start);
            ranges[j].start..stop
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no candidate satisfies the storage and balance constraints")]
pub struct NoCandidate;

/// The decision for one path: what to add and the segmentation it guarantees.
#[derive(Clone, Debug)]
pub struct Choice {
    pub candidate: Option<Candidate>,
    pub segments: Vec<Range<usize>>,
    pub evaluated: u64,
}

struct Ctx<'a> {
    graph: &'a DataGraph,
    servers: &'a ServerSet,
    sharding: &'a ShardingMap,
    config: PlannerConfig,
}

impl Ctx<'_> {
    fn choose(
        &self,
        r: &ReplicationScheme,
        loads: &[Cost],
        p: &CausalAccessPath,
        t: usize,
    ) -> Result<Choice, NoCandidate> {
        let sub = subpaths_under_sharding(p, self.sharding);
        let h = sub.len() - 1;
        if h <= t {
            return Ok(Choice {
                candidate: None,
                segments: sub.ranges,
                evaluated: 0,
            });
        }
        let stage = |sel: &[usize]| stage_candidate(sel, p, r, &sub, self.sharding, self.graph);
        let feasible = |c: &Candidate| {
            candidate_feasible(
                c,
                self.graph,
                self.servers,
                loads,
                self.config.balance_check,
            )
        };
        let mut evaluated = 0;
        let best = if self.config.two_pass {
            let mut ranked: Vec<(Cost, Vec<usize>)> = enumerate_candidates(h, t)
                .map(|sel| {
                    evaluated += 1;
                    (stage(&sel).cost, sel)
                })
                .collect();
            // Stable: equal costs keep lexicographic order.
            ranked.sort_by_key(|c| c.0);
            ranked
                .into_iter()
                .map(|(_, sel)| stage(&sel))
                .find(feasible)
        } else {
            let mut best: Option<Candidate> = None;
            for sel in enumerate_candidates(h, t) {
                evaluated += 1;
                let c = stage(&sel);
                if best.as_ref().is_none_or(|b| c.cost < b.cost) && feasible(&c) {
                    best = Some(c);
                }
            }
            best
        };
        let c = best.ok_or(NoCandidate)?;
        Ok(Choice {
            segments: candidate_segments(&c.selected, &sub),
            candidate: Some(c),
            evaluated,
        })
    }
}

/// Adds the staged replicas to `r` and returns the cost actually added.
/// Replicas another worker added in the meantime are not counted twice.
fn apply_choice(
    choice: &Choice,
    graph: &DataGraph,
    r: &ReplicationScheme,
    loads: &mut [Cost],
) -> Cost {
    let mut added = Cost::ZERO;
    if let Some(c) = &choice.candidate {
        for &(v, s) in &c.staged {
            if r.add(v, s) {
                loads[s.index()] += graph.cost(v);
                added += graph.cost(v);
            }
        }
    }
    added
}

/// Records every pair inside each segment so that replicas follow originals
/// on resharding.
fn record_segments(
    p: &CausalAccessPath,
    segments: &[Range<usize>],
    d: &ShardingMap,
    rm: &mut ReshardingMap,
) {
    for seg in segments {
        for y in seg.clone() {
            for x in seg.start..y {
                let u = p.nodes[x];
                rm.record_colocation(u, p.nodes[y], d.server_of(u));
            }
        }
    }
}

fn record_pruned(
    root: VertexId,
    tail: &[VertexId],
    first_end: usize,
    d: &ShardingMap,
    rm: &mut ReshardingMap,
) {
    for &v in &tail[..first_end - 1] {
        rm.record_colocation(root, v, d.server_of(root));
    }
}

/// Runs the path update on a copy of `r` and returns the extended scheme.
pub fn update(
    r: &ReplicationScheme,
    p: &CausalAccessPath,
    t: usize,
    graph: &DataGraph,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
) -> Result<ReplicationScheme, NoCandidate> {
    let ctx = Ctx {
        graph,
        servers,
        sharding,
        config,
    };
    let mut loads = r.loads(graph);
    let choice = ctx.choose(r, &loads, p, t)?;
    let out = r.clone();
    apply_choice(&choice, graph, &out, &mut loads);
    Ok(out)
}

/// What happened to one path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathOutcome {
    /// The bound cannot bind (infinite, or at least the path's hop count).
    Unconstrained,
    /// Same class as an earlier path.
    Pruned,
    /// Already within its bound under the sharding.
    Unchanged,
    Committed {
        added: Cost,
    },
}

/// Sequential planner state. Paths can be fed in any order.
pub struct Planner<'a> {
    ctx: Ctx<'a>,
    r: ReplicationScheme,
    loads: Vec<Cost>,
    rm: ReshardingMap,
    // Keyed by effective bound too: query types may share a pattern.
    classes: HashMap<(usize, ClassKey), usize>,
    evaluated: u64,
}

impl<'a> Planner<'a> {
    pub fn new(
        graph: &'a DataGraph,
        servers: &'a ServerSet,
        sharding: &'a ShardingMap,
        config: PlannerConfig,
    ) -> Self {
        let r = ReplicationScheme::from_sharding(sharding, servers.len());
        Planner {
            loads: r.loads(graph),
            r,
            rm: ReshardingMap::new(),
            classes: HashMap::new(),
            evaluated: 0,
            ctx: Ctx {
                graph,
                servers,
                sharding,
                config,
            },
        }
    }

    pub fn scheme(&self) -> &ReplicationScheme {
        &self.r
    }

    pub fn process(
        &mut self,
        p: &CausalAccessPath,
        bound: crate::workload::LatencyBound,
    ) -> Result<PathOutcome, NoCandidate> {
        let Some(t) = bound.effective(p.hops()) else {
            return Ok(PathOutcome::Unconstrained);
        };
        let key = self
            .ctx
            .config
            .prune
            .then(|| (t, class_key(p, self.ctx.sharding)));
        if let Some(key) = &key {
            if let Some(&end) = self.classes.get(key) {
                record_pruned(p.root(), &key.1 .1, end, self.ctx.sharding, &mut self.rm);
                return Ok(PathOutcome::Pruned);
            }
        }
        let choice = self.ctx.choose(&self.r, &self.loads, p, t)?;
        self.evaluated += choice.evaluated;
        let added = apply_choice(&choice, self.ctx.graph, &self.r, &mut self.loads);
        record_segments(p, &choice.segments, self.ctx.sharding, &mut self.rm);
        if let Some(key) = key {
            self.classes.insert(key, choice.segments[0].end);
        }
        Ok(match choice.candidate {
            None => PathOutcome::Unchanged,
            Some(_) => PathOutcome::Committed { added },
        })
    }

    pub fn finish(self) -> (ReplicationScheme, ReshardingMap) {
        (self.r, self.rm)
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct QueryStats {
    pub name: String,
    pub paths: u64,
    pub pruned: u64,
    pub updated: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PlanStats {
    /// One entry per query type, in workload order.
    pub per_query: Vec<QueryStats>,
    pub candidates_evaluated: u64,
    pub plan_seconds: f64,
    pub final_check_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PlanStatus {
    Ok,
    NoSolutionFound {
        reason: String,
        query: Option<String>,
        path: Option<Vec<String>>,
    },
}

impl PlanStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PlanStatus::Ok)
    }

    pub fn label(&self) -> &'static str {
        match self {
            PlanStatus::Ok => "ok",
            PlanStatus::NoSolutionFound { .. } => "no-solution-found",
        }
    }
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanStatus::Ok => f.write_str("ok"),
            PlanStatus::NoSolutionFound {
                reason,
                query,
                path,
            } => {
                write!(f, "no-solution-found: {reason}")?;
                if let Some(q) = query {
                    write!(f, " (query `{q}`")?;
                    if let Some(p) = path {
                        write!(f, ", path {}", p.join(" -> "))?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Scheme, resharding map and bookkeeping. On failure the scheme holds
/// whatever was committed before the failing path.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub scheme: ReplicationScheme,
    pub rmap: ReshardingMap,
    pub stats: PlanStats,
    pub status: PlanStatus,
}

pub fn greedy_plan(
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
) -> PlanOutcome {
    let started = Instant::now();
    let (scheme, rmap, mut stats, failure) = if config.parallel() {
        plan_parallel(graph, workload, sharding, servers, config)
    } else {
        plan_sequential(graph, workload, sharding, servers, config)
    };
    stats.plan_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let status = match failure {
        Some(status) => status,
        None => final_check(graph, servers, &scheme),
    };
    stats.final_check_seconds = started.elapsed().as_secs_f64();
    PlanOutcome {
        scheme,
        rmap,
        stats,
        status,
    }
}

fn no_candidate(graph: &DataGraph, query: &str, p: &CausalAccessPath) -> PlanStatus {
    PlanStatus::NoSolutionFound {
        reason: NoCandidate.to_string(),
        query: Some(query.to_string()),
        path: Some(p.names(graph).into_iter().map(str::to_string).collect()),
    }
}

/// Recomputes exact loads and checks capacity and balance.
fn final_check(graph: &DataGraph, servers: &ServerSet, r: &ReplicationScheme) -> PlanStatus {
    let loads = r.loads(graph);
    if let Some(s) = servers
        .ids()
        .find(|&s| !servers.capacity(s).admits(loads[s.index()]))
    {
        return PlanStatus::NoSolutionFound {
            reason: format!(
                "server `{}` stores {} which exceeds its capacity {}",
                servers.name(s),
                loads[s.index()],
                servers.capacity(s)
            ),
            query: None,
            path: None,
        };
    }
    if !servers.imbalance().admits(&loads) {
        return PlanStatus::NoSolutionFound {
            reason: format!(
                "load imbalance {} exceeds the bound {}",
                crate::cost::max_pairwise_difference(&loads),
                servers.imbalance()
            ),
            query: None,
            path: None,
        };
    }
    PlanStatus::Ok
}

type Parts = (
    ReplicationScheme,
    ReshardingMap,
    PlanStats,
    Option<PlanStatus>,
);

fn plan_sequential(
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
) -> Parts {
    let mut planner = Planner::new(graph, servers, sharding, config);
    let mut stats = PlanStats::default();
    let mut failure = None;
    'queries: for qt in &workload.queries {
        let mut qs = QueryStats {
            name: qt.name.clone(),
            ..QueryStats::default()
        };
        for p in enumerate_paths(graph, qt) {
            qs.paths += 1;
            match planner.process(&p, qt.bound) {
                Ok(PathOutcome::Pruned) => qs.pruned += 1,
                Ok(PathOutcome::Committed { .. }) => qs.updated += 1,
                Ok(_) => {}
                Err(NoCandidate) => {
                    failure = Some(no_candidate(graph, &qt.name, &p));
                    stats.per_query.push(qs);
                    break 'queries;
                }
            }
        }
        stats.per_query.push(qs);
    }
    stats.candidates_evaluated = planner.evaluated;
    let (r, rm) = planner.finish();
    (r, rm, stats, failure)
}

fn plan_parallel(
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
) -> Parts {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("thread pool");
    let ctx = Ctx {
        graph,
        servers,
        sharding,
        config,
    };
    let r = ReplicationScheme::from_sharding(sharding, servers.len());
    let loads = Mutex::new(r.loads(graph));
    let rm = Mutex::new(ReshardingMap::new());
    // `None` marks a class whose representative is still being planned.
    let classes: DashMap<(usize, ClassKey), Option<usize>> = DashMap::new();
    let deferred: Mutex<Vec<(VertexId, (usize, ClassKey))>> = Mutex::new(Vec::new());
    let evaluated = AtomicU64::new(0);
    let mut stats = PlanStats::default();
    let mut failure = None;

    for qt in &workload.queries {
        let (paths, pruned, updated) = (AtomicU64::new(0), AtomicU64::new(0), AtomicU64::new(0));
        let result = pool.install(|| {
            roots(graph, qt).into_par_iter().try_for_each(|root| {
                for p in enumerate_paths_from(graph, qt, root) {
                    paths.fetch_add(1, Ordering::Relaxed);
                    let Some(t) = qt.bound.effective(p.hops()) else {
                        continue;
                    };
                    let key = config.prune.then(|| (t, class_key(&p, sharding)));
                    if let Some(key) = &key {
                        let known = match classes.entry(key.clone()) {
                            dashmap::Entry::Occupied(e) => Some(*e.get()),
                            dashmap::Entry::Vacant(e) => {
                                e.insert(None);
                                None
                            }
                        };
                        match known {
                            Some(Some(end)) => {
                                record_pruned(
                                    p.root(),
                                    &key.1 .1,
                                    end,
                                    sharding,
                                    &mut rm.lock().unwrap(),
                                );
                                pruned.fetch_add(1, Ordering::Relaxed);
                                continue;
                            }
                            Some(None) => {
                                deferred.lock().unwrap().push((p.root(), key.clone()));
                                pruned.fetch_add(1, Ordering::Relaxed);
                                continue;
                            }
                            None => {}
                        }
                    }
                    let snapshot = loads.lock().unwrap().clone();
                    let choice = ctx.choose(&r, &snapshot, &p, t).map_err(|_| p.clone())?;
                    evaluated.fetch_add(choice.evaluated, Ordering::Relaxed);
                    apply_choice(&choice, graph, &r, &mut loads.lock().unwrap());
                    record_segments(&p, &choice.segments, sharding, &mut rm.lock().unwrap());
                    if choice.candidate.is_some() {
                        updated.fetch_add(1, Ordering::Relaxed);
                    }
                    if let Some(key) = key {
                        classes.insert(key, Some(choice.segments[0].end));
                    }
                }
                Ok::<(), CausalAccessPath>(())
            })
        });
        stats.per_query.push(QueryStats {
            name: qt.name.clone(),
            paths: paths.into_inner(),
            pruned: pruned.into_inner(),
            updated: updated.into_inner(),
        });
        if let Err(p) = result {
            failure = Some(no_candidate(graph, &qt.name, &p));
            break;
        }
    }

    let mut rm = rm.into_inner().unwrap();
    for (root, key) in deferred.into_inner().unwrap() {
        if let Some(Some(end)) = classes.get(&key).map(|e| *e.value()) {
            record_pruned(root, &key.1 .1, end, sharding, &mut rm);
        }
    }
    stats.candidates_evaluated = evaluated.into_inner();
    (r, rm, stats, failure)
}
