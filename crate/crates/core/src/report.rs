//! Plan reports and the latency/overhead sweep table.

use std::io::Write;

use serde::Serialize;

use crate::cost::Cost;
use crate::graph::{DataGraph, ReplicationScheme, ServerSet, ShardingMap};
use crate::planner::{greedy_plan, PlanOutcome, PlanStatus, PlannerConfig};
use crate::routing::{validate_workload, ValidateOptions, ValidationReport};
use crate::workload::{LatencyBound, WorkloadSpec};

/// Bumped whenever a field changes meaning or disappears.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ServerEntry {
    pub server: String,
    pub storage: Cost,
    /// `null` when unbounded.
    pub capacity: Option<Cost>,
    /// Fraction of the total storage held by this server.
    pub share: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct QueryEntry {
    pub name: String,
    pub t: LatencyBound,
    pub worst_latency: usize,
    pub paths: u64,
    pub pruned: u64,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Timing {
    pub plan_seconds: f64,
    pub final_check_seconds: f64,
    pub validate_seconds: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Failure {
    pub reason: String,
    pub query: Option<String>,
    pub path: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PlanReport {
    pub report_version: u32,
    pub status: &'static str,
    pub failure: Option<Failure>,
    pub total_original_cost: Cost,
    pub total_added_cost: Cost,
    /// Exact rational form of the added cost.
    pub total_added_cost_exact: String,
    pub replication_overhead: f64,
    pub replicas: usize,
    pub per_server: Vec<ServerEntry>,
    pub imbalance: Cost,
    pub imbalance_bound: Option<Cost>,
    pub per_query: Vec<QueryEntry>,
    pub latency_violations: u64,
    pub candidates_evaluated: u64,
    pub timing: Timing,
}

impl PlanReport {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Added storage over original storage; exactly 0 when nothing was added.
pub fn replication_overhead(graph: &DataGraph, r: &ReplicationScheme) -> (Cost, f64) {
    let original = graph.total_cost();
    let added = r.total_storage(graph) - original;
    let ratio = if added.is_zero() {
        0.0
    } else {
        added.to_f64() / original.to_f64()
    };
    (added, ratio)
}

/// Combines the planner outcome with an independent validation of its scheme.
/// A clean planner status is downgraded if validation finds any violation.
pub fn build_plan_report(
    graph: &DataGraph,
    servers: &ServerSet,
    outcome: &PlanOutcome,
    validation: &ValidationReport,
    validate_seconds: f64,
) -> PlanReport {
    let r = &outcome.scheme;
    let (added, overhead) = replication_overhead(graph, r);
    let loads = r.loads(graph);
    let total: Cost = loads.iter().sum();
    let per_server = servers
        .ids()
        .map(|s| ServerEntry {
            server: servers.name(s).to_string(),
            storage: loads[s.index()],
            capacity: servers.capacity(s).0,
            share: if total.is_zero() {
                0.0
            } else {
                loads[s.index()].to_f64() / total.to_f64()
            },
        })
        .collect();
    let per_query = validation
        .per_query
        .iter()
        .map(|q| QueryEntry {
            name: q.name.clone(),
            t: q.bound,
            worst_latency: q.worst_latency,
            paths: q.path_count,
            pruned: outcome
                .stats
                .per_query
                .iter()
                .filter(|s| s.name == q.name)
                .map(|s| s.pruned)
                .sum(),
        })
        .collect();

    let failure = match &outcome.status {
        PlanStatus::NoSolutionFound {
            reason,
            query,
            path,
        } => Some(Failure {
            reason: reason.clone(),
            query: query.clone(),
            path: path.clone(),
        }),
        PlanStatus::Ok if !validation.ok => Some(Failure {
            reason: validation_summary(validation),
            query: None,
            path: None,
        }),
        PlanStatus::Ok => None,
    };

    PlanReport {
        report_version: REPORT_VERSION,
        status: if failure.is_none() {
            "ok"
        } else {
            "no-solution-found"
        },
        failure,
        total_original_cost: graph.total_cost(),
        total_added_cost: added,
        total_added_cost_exact: added.to_string(),
        replication_overhead: overhead,
        replicas: r.replica_count(),
        per_server,
        imbalance: validation.imbalance,
        imbalance_bound: validation.imbalance_bound,
        per_query,
        latency_violations: validation.latency_violations,
        candidates_evaluated: outcome.stats.candidates_evaluated,
        timing: Timing {
            plan_seconds: outcome.stats.plan_seconds,
            final_check_seconds: outcome.stats.final_check_seconds,
            validate_seconds,
        },
    }
}

/// One line naming every kind of violation found.
pub fn validation_summary(v: &ValidationReport) -> String {
    let mut parts = Vec::new();
    if !v.missing_originals.is_empty() {
        parts.push(format!(
            "original missing for {}",
            v.missing_originals.join(", ")
        ));
    }
    if v.latency_violations > 0 {
        parts.push(format!(
            "{} path(s) exceed their latency bound",
            v.latency_violations
        ));
    }
    if !v.capacity_violations.is_empty() {
        parts.push(format!(
            "over capacity: {}",
            v.capacity_violations.join(", ")
        ));
    }
    if !v.balance_ok {
        parts.push(format!("load imbalance {} exceeds the bound", v.imbalance));
    }
    if parts.is_empty() {
        "all constraints hold".to_string()
    } else {
        parts.join("; ")
    }
}

/// Plans, validates and reports in one go.
pub fn plan_and_report(
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
) -> (PlanOutcome, PlanReport) {
    let outcome = greedy_plan(graph, workload, sharding, servers, config);
    let started = std::time::Instant::now();
    let validation = validate_workload(
        graph,
        workload,
        sharding,
        servers,
        &outcome.scheme,
        ValidateOptions {
            workers: if config.deterministic {
                1
            } else {
                config.workers
            },
            ..ValidateOptions::default()
        },
    );
    let report = build_plan_report(
        graph,
        servers,
        &outcome,
        &validation,
        started.elapsed().as_secs_f64(),
    );
    (outcome, report)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepRow {
    pub t: LatencyBound,
    pub overhead: f64,
    pub worst_latency: usize,
    pub status: &'static str,
}

/// Plans once per bound, applying the bound to every query type.
pub fn sweep(
    graph: &DataGraph,
    workload: &WorkloadSpec,
    sharding: &ShardingMap,
    servers: &ServerSet,
    config: PlannerConfig,
    bounds: &[LatencyBound],
) -> Vec<SweepRow> {
    bounds
        .iter()
        .map(|&t| {
            let (_, report) =
                plan_and_report(graph, &workload.with_bound(t), sharding, servers, config);
            SweepRow {
                t,
                overhead: report.replication_overhead,
                worst_latency: report
                    .per_query
                    .iter()
                    .map(|q| q.worst_latency)
                    .max()
                    .unwrap_or(0),
                status: report.status,
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,overhead,worst_latency,status")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.t, row.overhead, row.worst_latency, row.status
        )?;
    }
    Ok(())
}
