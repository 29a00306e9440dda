use std::fmt;
use std::io::Write;
use std::num::NonZeroUsize;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use latbound::gen::{random_instance, snb_toy, RandomParams};
use latbound::graph::load_scheme;
use latbound::oracle::{
    brute_force_feasible, brute_force_optimal, min_bridge_bisection_bf,
    reduce_bridge_to_replication, triple_gadget, RootRouting,
};
use latbound::planner::{greedy_plan, PlannerConfig};
use latbound::report::{build_plan_report, sweep, validation_summary, write_sweep_csv, SweepRow};
use latbound::reshard::{apply_reshard, load_moves, load_rmap, ReshardError};
use latbound::routing::{validate_workload, ValidateOptions};
use latbound::workload::LatencyBound;

use crate::args::{
    Command, GenCommand, OracleCommand, PlanArgs, ReshardArgs, Routing, ValidateArgs,
};
use crate::input::{self, Loaded};

/// A constraint could not be met. Exits with status 2 instead of 1.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Plan(a) => plan(a),
        Command::Validate(a) => validate(a),
        Command::Reshard(a) => reshard(a),
        Command::Gen(g) => gen(g),
        Command::Oracle(o) => oracle(o),
    }
}

fn hardware_workers() -> usize {
    std::thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

fn plan(a: PlanArgs) -> Result<()> {
    let inst = a.deployment.instance(&a.workload)?;
    let workers = if a.deterministic {
        1
    } else {
        a.workers.unwrap_or_else(hardware_workers).max(1)
    };
    let config = PlannerConfig {
        two_pass: !a.single_pass,
        deterministic: a.deterministic,
        workers,
        balance_check: a.balance_check,
        prune: !a.no_prune,
    };
    let bounds = match &a.t_override {
        Some(list) => input::bounds(list)?,
        None => Vec::new(),
    };

    if bounds.len() > 1 {
        let rows = sweep(
            &inst.graph,
            &inst.workload,
            &inst.sharding,
            &inst.servers,
            config,
            &bounds,
        );
        emit_csv(&rows, a.csv.as_deref())?;
        let failed: Vec<String> = rows
            .iter()
            .filter(|r| r.status != "ok")
            .map(|r| r.t.to_string())
            .collect();
        if !failed.is_empty() {
            return Err(
                Infeasible(format!("no solution found for t = {}", failed.join(", "))).into(),
            );
        }
        return Ok(());
    }

    let workload = match bounds.first() {
        Some(&t) => inst.workload.with_bound(t),
        None => inst.workload.clone(),
    };
    let outcome = greedy_plan(
        &inst.graph,
        &workload,
        &inst.sharding,
        &inst.servers,
        config,
    );
    let started = Instant::now();
    let validation = validate_workload(
        &inst.graph,
        &workload,
        &inst.sharding,
        &inst.servers,
        &outcome.scheme,
        ValidateOptions {
            workers,
            ..ValidateOptions::default()
        },
    );
    let report = build_plan_report(
        &inst.graph,
        &inst.servers,
        &outcome,
        &validation,
        started.elapsed().as_secs_f64(),
    );

    input::write(
        &a.out_dir,
        "scheme.txt",
        &outcome.scheme.to_text(&inst.graph, &inst.servers),
    )?;
    input::write(
        &a.out_dir,
        "rmap.txt",
        &outcome.rmap.to_text(&inst.graph, &inst.servers),
    )?;
    input::write(&a.out_dir, "report.json", &(report.to_json() + "\n"))?;
    if a.csv.is_some() {
        let row = SweepRow {
            t: bounds
                .first()
                .copied()
                .unwrap_or_else(|| tightest(&workload)),
            overhead: report.replication_overhead,
            worst_latency: report
                .per_query
                .iter()
                .map(|q| q.worst_latency)
                .max()
                .unwrap_or(0),
            status: report.status,
        };
        emit_csv(&[row], a.csv.as_deref())?;
    }

    println!(
        "status {}: added {} ({:.4} overhead), {} replicas",
        report.status, report.total_added_cost, report.replication_overhead, report.replicas
    );
    match report.failure {
        Some(f) => Err(Infeasible(f.reason).into()),
        None => Ok(()),
    }
}

/// The t column when the workload keeps its own per-query bounds.
fn tightest(w: &latbound::workload::WorkloadSpec) -> LatencyBound {
    w.queries
        .iter()
        .filter_map(|q| match q.bound {
            LatencyBound::Bounded(t) => Some(t),
            LatencyBound::Unbounded => None,
        })
        .min()
        .map_or(LatencyBound::Unbounded, LatencyBound::Bounded)
}

fn emit_csv(rows: &[SweepRow], path: Option<&std::path::Path>) -> Result<()> {
    match path {
        Some(p) => {
            let f = std::fs::File::create(p)
                .with_context(|| format!("cannot write {}", p.display()))?;
            write_sweep_csv(rows, f)?;
        }
        None => write_sweep_csv(rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let inst = a.deployment.instance(&a.workload)?;
    let r = load_scheme(input::open(&a.scheme)?, &inst.graph, &inst.servers)
        .with_context(|| a.scheme.display().to_string())?;
    let report = validate_workload(
        &inst.graph,
        &inst.workload,
        &inst.sharding,
        &inst.servers,
        &r,
        ValidateOptions {
            workers: a.workers.unwrap_or_else(hardware_workers).max(1),
            ..ValidateOptions::default()
        },
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.ok {
        Ok(())
    } else {
        Err(Infeasible(validation_summary(&report)).into())
    }
}

fn reshard(a: ReshardArgs) -> Result<()> {
    let Loaded {
        graph,
        servers,
        mut sharding,
    } = a.deployment.load()?;
    let mut r = load_scheme(input::open(&a.scheme)?, &graph, &servers)
        .with_context(|| a.scheme.display().to_string())?;
    let mut rm = load_rmap(input::open(&a.rmap)?, &graph, &servers, &sharding)
        .with_context(|| a.rmap.display().to_string())?;
    let moves = load_moves(input::open(&a.moves)?, &graph, &servers)
        .with_context(|| a.moves.display().to_string())?;

    let summary = match apply_reshard(&moves, &graph, &servers, &mut r, &mut rm, &mut sharding) {
        Ok(s) => s,
        Err(e @ ReshardError::CapacityExceeded { .. }) => {
            return Err(Infeasible(e.to_string()).into())
        }
        Err(e) => return Err(anyhow!(e)),
    };
    input::write(&a.out_dir, "shard.txt", &sharding.to_text(&graph, &servers))?;
    input::write(&a.out_dir, "scheme.txt", &r.to_text(&graph, &servers))?;
    input::write(&a.out_dir, "rmap.txt", &rm.to_text(&graph, &servers))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);

    if let Some(path) = &a.workload {
        let w = input::workload(path)?;
        let v = validate_workload(
            &graph,
            &w,
            &sharding,
            &servers,
            &r,
            ValidateOptions::default(),
        );
        if !v.ok {
            return Err(Infeasible(validation_summary(&v)).into());
        }
    }
    Ok(())
}

fn gen(g: GenCommand) -> Result<()> {
    match g {
        GenCommand::Random {
            vertices,
            servers,
            query_types,
            degree,
            max_hops,
            bounds,
            seed,
            out_dir,
        } => {
            if vertices == 0 || servers == 0 {
                bail!("--vertices and --servers must be positive");
            }
            let params = RandomParams {
                vertices,
                servers,
                query_types,
                degree,
                max_hops,
                bounds: input::bounds(&bounds)?,
                ..RandomParams::default()
            };
            random_instance(&params, seed).write_files(&out_dir)?;
        }
        GenCommand::SnbToy {
            persons,
            servers,
            seed,
            out_dir,
        } => {
            if persons < 2 || servers == 0 {
                bail!("snb-toy needs at least 2 persons and 1 server");
            }
            snb_toy(persons, servers, seed).write_files(&out_dir)?;
        }
        GenCommand::BridgeReduction { source, k, out_dir } => {
            let (ug, _) = input::undirected(&source)?;
            reduce_bridge_to_replication(&ug, k)?.write_files(&out_dir)?;
        }
        GenCommand::TripleGadget { source, out_dir } => {
            let (ug, _) = input::undirected(&source)?;
            input::write(
                &out_dir,
                "graph.txt",
                &triple_gadget(&ug)?.to_data_graph().to_text(),
            )?;
        }
    }
    Ok(())
}

fn oracle(o: OracleCommand) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match o {
        OracleCommand::Optimal {
            deployment,
            workload,
            t_override,
            out_dir,
        } => {
            let inst = deployment.instance(&workload)?;
            let t = match t_override
                .as_deref()
                .map(input::bounds)
                .transpose()?
                .as_deref()
            {
                None => None,
                Some([t]) => Some(*t),
                Some(_) => bail!("oracle optimal takes a single --t-override value"),
            };
            let Some(opt) = brute_force_optimal(&inst, t)? else {
                writeln!(out, "INFEASIBLE")?;
                return Err(
                    Infeasible("no replication scheme satisfies the constraints".into()).into(),
                );
            };
            writeln!(out, "added_cost {}", opt.added_cost)?;
            writeln!(out, "total_storage {}", opt.total_storage)?;
            writeln!(out, "replicas {}", opt.replicas)?;
            if let Some(dir) = out_dir {
                input::write(
                    &dir,
                    "scheme.txt",
                    &opt.scheme.to_text(&inst.graph, &inst.servers),
                )?;
            }
        }
        OracleCommand::Feasible {
            deployment,
            workload,
            routing,
        } => {
            let inst = deployment.instance(&workload)?;
            let routing = match routing {
                Routing::Pinned => RootRouting::Pinned,
                Routing::AnyCopy => RootRouting::AnyCopy,
            };
            if brute_force_feasible(&inst, routing)?.is_none() {
                writeln!(out, "INFEASIBLE")?;
                return Err(
                    Infeasible("no replication scheme satisfies the constraints".into()).into(),
                );
            }
            writeln!(out, "FEASIBLE")?;
        }
        OracleCommand::Bisection { source, k } => {
            let (ug, names) = input::undirected(&source)?;
            let Some(b) = min_bridge_bisection_bf(&ug, k)? else {
                writeln!(out, "INFEASIBLE")?;
                return Err(Infeasible(format!(
                    "no bisection has at most {k} bridge vertices per side"
                ))
                .into());
            };
            let (first, second) = b.sides();
            let label = |side: Vec<usize>| {
                side.into_iter()
                    .map(|v| names[v].as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let (b1, b2) = b.bridges(&ug);
            writeln!(out, "side1 {}", label(first))?;
            writeln!(out, "side2 {}", label(second))?;
            writeln!(out, "bridges {b1} {b2}")?;
            writeln!(out, "cut {}", b.cut(&ug))?;
        }
    }
    Ok(())
}
