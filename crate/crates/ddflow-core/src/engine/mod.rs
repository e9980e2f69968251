//! The taint query engine.
//!
//! Queries run backward from each sink over the materialized
//! data-dependence edges, filtering and extending steps with callee
//! summaries at every move. Whenever a walk reaches a method boundary
//! (a parameter, a call into a defined method, an argument a callee may
//! have written) it stops with a partial result; the coordinator turns
//! each partial into follow-up tasks in the neighboring method, up to a
//! configurable call depth. Boundaries that would exceed the depth are
//! reported as widened flows instead of being dropped, so deep chains
//! over-approximate rather than vanish.
//!
//! Tasks are independent, so workers solve them in parallel; results
//! and the spawning of new tasks are serialized through one
//! coordinator, which makes the reported flow set and the task count
//! independent of scheduling.

use crate::cpg::{Cpg, EdgeType, NodeId, NodeKind};
use crate::semantics::SemanticsRegistry;
use crossbeam_channel::unbounded;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

mod solver;
use solver::{run_task, ResultTable};

pub struct TaintQuery<'a> {
    pub cpg: &'a Cpg,
    pub registry: &'a SemanticsRegistry,
    pub sources: BTreeSet<NodeId>,
    pub sinks: Vec<NodeId>,
    /// Widening threshold: boundary expansions beyond this many nested
    /// tasks are reported as widened flows instead of being explored.
    pub max_call_depth: u32,
    /// Worker threads; 0 picks the machine's available parallelism.
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("maximum call depth must be at least 1")]
    DepthZero,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) enum Role {
    /// The value flowing into this node before its call runs.
    EntryUse,
    /// The value this argument holds after its call ran.
    PostDef,
    /// The value a call produces.
    ValueAnchor,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) enum ResultKind {
    Complete,
    Partial,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) struct PathElement {
    pub node: NodeId,
    /// False when the element may still receive its value from a callee
    /// that has to be expanded.
    pub resolved: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct Task {
    pub start: NodeId,
    /// Path already established downstream of the start node.
    pub suffix: Vec<PathElement>,
    pub depth: u32,
}

#[derive(Clone, Debug)]
pub(crate) struct TaintResult {
    pub kind: ResultKind,
    /// Most upstream element first, sink last.
    pub path: Vec<PathElement>,
    pub depth: u32,
}

pub(crate) struct QueryCtx<'a> {
    pub cpg: &'a Cpg,
    pub registry: &'a SemanticsRegistry,
    pub sources: &'a BTreeSet<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowElement {
    pub id: NodeId,
    pub code: String,
    pub line: u32,
    pub method: String,
}

#[derive(Clone, Debug)]
pub struct Flow {
    pub elements: Vec<FlowElement>,
    pub widened: bool,
}

#[derive(Clone, Debug)]
pub struct QueryStats {
    pub tasks: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub flows: Vec<Flow>,
    pub stats: QueryStats,
}

pub fn run_query(q: &TaintQuery) -> Result<FlowReport, QueryError> {
    if q.max_call_depth < 1 {
        return Err(QueryError::DepthZero);
    }
    let started = Instant::now();
    let ctx = QueryCtx { cpg: q.cpg, registry: q.registry, sources: &q.sources };
    let table = ResultTable::new();
    let jobs = if q.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        q.jobs
    };

    let (task_tx, task_rx) = unbounded::<Task>();
    let (out_tx, out_rx) = unbounded::<Vec<TaintResult>>();

    let mut seen: BTreeSet<(NodeId, Vec<NodeId>, u32)> = BTreeSet::new();
    let mut flows: BTreeMap<Vec<NodeId>, bool> = BTreeMap::new();

    std::thread::scope(|s| {
        for _ in 0..jobs {
            let rx = task_rx.clone();
            let tx = out_tx.clone();
            let ctx = &ctx;
            let table = &table;
            s.spawn(move || {
                while let Ok(task) = rx.recv() {
                    let results = run_task(ctx, table, &task);
                    if tx.send(results).is_err() {
                        break;
                    }
                }
            });
        }
        drop(out_tx);

        let mut pending: u64 = 0;
        let mut sinks = q.sinks.clone();
        sinks.sort();
        sinks.dedup();
        for sink in sinks {
            if q.cpg.get(sink).is_none() {
                continue;
            }
            if seen.insert((sink, Vec::new(), 0)) {
                task_tx.send(Task { start: sink, suffix: Vec::new(), depth: 0 }).unwrap();
                pending += 1;
            }
        }
        while pending > 0 {
            let results = out_rx.recv().expect("a task is pending, so workers are alive");
            pending -= 1;
            for r in results {
                if r.kind == ResultKind::Complete {
                    record(&mut flows, &r.path, false);
                }
                let targets = expansion_targets(q.cpg, &r.path[0]);
                if targets.is_empty() {
                    continue;
                }
                if r.depth + 1 >= q.max_call_depth {
                    record(&mut flows, &r.path, true);
                    continue;
                }
                let path_ids: Vec<NodeId> = r.path.iter().map(|e| e.node).collect();
                let id_set: BTreeSet<NodeId> = path_ids.iter().copied().collect();
                for t in targets {
                    if id_set.contains(&t) {
                        continue;
                    }
                    if seen.insert((t, path_ids.clone(), r.depth + 1)) {
                        task_tx
                            .send(Task { start: t, suffix: r.path.clone(), depth: r.depth + 1 })
                            .unwrap();
                        pending += 1;
                    }
                }
            }
        }
        drop(task_tx);
    });

    let mut ordered: Vec<(Vec<NodeId>, bool)> = flows.into_iter().collect();
    ordered.sort_by(|(a, _), (b, _)| {
        (a.last(), a.first(), a.len(), a).cmp(&(b.last(), b.first(), b.len(), b))
    });
    let flows = ordered
        .into_iter()
        .map(|(ids, widened)| Flow {
            widened,
            elements: ids
                .iter()
                .map(|&id| {
                    let n = q.cpg.get(id).expect("flow elements come from the graph");
                    FlowElement {
                        id,
                        code: n.code.clone(),
                        line: n.line,
                        method: q.cpg.owning_method_name(id).to_string(),
                    }
                })
                .collect(),
        })
        .collect();
    Ok(FlowReport {
        flows,
        stats: QueryStats {
            tasks: seen.len() as u64,
            elapsed_ms: started.elapsed().as_millis() as u64,
        },
    })
}

fn record(flows: &mut BTreeMap<Vec<NodeId>, bool>, path: &[PathElement], widened: bool) {
    let ids: Vec<NodeId> = path.iter().map(|e| e.node).collect();
    flows.entry(ids).and_modify(|w| *w = *w && widened).or_insert(widened);
}

/// Follow-up task start nodes for a result's head element.
///
/// A parameter head continues at the matching argument of every caller;
/// an unresolved call head continues at the return node of each method
/// it can dispatch to; an unresolved written-argument head continues at
/// the callee's matching output parameter. External stubs have no body
/// to continue into and contribute nothing.
pub(crate) fn expansion_targets(cpg: &Cpg, head: &PathElement) -> Vec<NodeId> {
    let Some(node) = cpg.get(head.node) else {
        return Vec::new();
    };
    let mut targets = Vec::new();
    if node.kind == NodeKind::ParameterIn {
        let mut callers: Vec<NodeId> = cpg.callers_of(node.method_id).to_vec();
        for &reference in cpg.in_neighbors(node.method_id, EdgeType::Ref).unwrap_or(&[]) {
            if cpg.get(reference).map(|n| n.argument_index) == Some(0) {
                if let Some(call) = cpg.enclosing_call(reference) {
                    callers.push(call);
                }
            }
        }
        for c in callers {
            if let Some(a) = cpg.argument_at(c, node.argument_index) {
                targets.push(a);
            }
        }
    } else if !head.resolved && node.kind == NodeKind::Call {
        for m in dispatch_targets(cpg, head.node) {
            if let Some(mr) = cpg.method_return_of(m) {
                targets.push(mr);
            }
        }
    } else if !head.resolved && cpg.is_call_argument(head.node) {
        let call = cpg.enclosing_call(head.node).unwrap();
        for m in dispatch_targets(cpg, call) {
            if let Some(po) = cpg.parameter_out_at(m, node.argument_index) {
                targets.push(po);
            }
        }
    }
    targets.sort();
    targets.dedup();
    targets
}

/// Defined methods a call site may enter: its resolved callee plus any
/// method its receiver references as a value.
fn dispatch_targets(cpg: &Cpg, call: NodeId) -> Vec<NodeId> {
    let mut methods = Vec::new();
    if let Some(m) = cpg.callee_of(call) {
        if cpg.get(m).map(|n| n.kind) == Some(NodeKind::Method) {
            methods.push(m);
        }
    }
    if let Some(arg0) = cpg.argument_at(call, 0) {
        for &m in cpg.out_neighbors(arg0, EdgeType::Ref).unwrap_or(&[]) {
            if cpg.get(m).map(|n| n.kind) == Some(NodeKind::Method) {
                methods.push(m);
            }
        }
    }
    methods.sort();
    methods.dedup();
    methods
}
