//! Per-task backward walks and the shared result table.

use super::{PathElement, QueryCtx, ResultKind, Role, TaintResult, Task};
use crate::cpg::{Cpg, EdgeType, NodeId, NodeKind};
use crate::semantics::validity::{
    callee_is_internal, implied_same_call_parents, implied_value_parents, is_output_arg,
    is_valid_edge, Validity,
};
use crate::semantics::SemanticsRegistry;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::RwLock;

type Key = (NodeId, Role, u32);
type Piece = (ResultKind, Vec<PathElement>);

/// Cache of finished walks, keyed by start node, start role and task
/// depth. A slot holds every path piece the walk from that key emitted,
/// upstream head first, ending at the key's node. Pieces never include
/// a task's suffix, so they can be reused under any suffix that stays
/// node-disjoint.
pub(crate) struct ResultTable {
    slots: RwLock<BTreeMap<Key, Vec<Piece>>>,
}

impl ResultTable {
    pub(crate) fn new() -> Self {
        ResultTable { slots: RwLock::new(BTreeMap::new()) }
    }

    fn get(&self, key: &Key) -> Option<Vec<Piece>> {
        self.slots.read().unwrap().get(key).cloned()
    }

    fn publish(&self, key: Key, mut pieces: Vec<Piece>) {
        pieces.sort();
        pieces.dedup();
        let mut slots = self.slots.write().unwrap();
        let slot = slots.entry(key).or_default();
        for piece in pieces {
            if !slot.contains(&piece) {
                slot.push(piece);
            }
        }
        slot.sort();
        slot.dedup();
    }
}

pub(crate) fn run_task(ctx: &QueryCtx, table: &ResultTable, task: &Task) -> Vec<TaintResult> {
    let start_role = start_role(ctx.cpg, task.start);
    let key = (task.start, start_role, task.depth);
    let suffix_ids: BTreeSet<NodeId> = task.suffix.iter().map(|e| e.node).collect();
    if let Some(pieces) = table.get(&key) {
        let mut results = Vec::new();
        for (kind, piece) in pieces {
            if piece.iter().all(|e| !suffix_ids.contains(&e.node)) {
                let mut path = piece;
                path.extend_from_slice(&task.suffix);
                results.push(TaintResult { kind, path, depth: task.depth });
            }
        }
        return results;
    }

    let mut walker = Walker {
        ctx,
        table,
        depth: task.depth,
        suffix: &task.suffix,
        suffix_ids,
        chain: Vec::new(),
        chain_ids: BTreeSet::new(),
        frames: Vec::new(),
        pieces: Vec::new(),
        results: Vec::new(),
    };
    walker.run(task.start, start_role);
    table.publish(key, walker.pieces);
    walker.results
}

fn start_role(cpg: &Cpg, node: NodeId) -> Role {
    if cpg.get(node).map(|n| n.kind) == Some(NodeKind::Call) {
        Role::ValueAnchor
    } else {
        Role::EntryUse
    }
}

struct Frame {
    parents: Vec<(NodeId, Role)>,
    next: usize,
}

struct Walker<'a, 'q> {
    ctx: &'a QueryCtx<'q>,
    table: &'a ResultTable,
    depth: u32,
    suffix: &'a [PathElement],
    suffix_ids: BTreeSet<NodeId>,
    chain: Vec<PathElement>,
    chain_ids: BTreeSet<NodeId>,
    frames: Vec<Frame>,
    pieces: Vec<Piece>,
    results: Vec<TaintResult>,
}

impl Walker<'_, '_> {
    fn run(&mut self, start: NodeId, role: Role) {
        self.enter(start, role);
        loop {
            let step = {
                let Some(frame) = self.frames.last_mut() else { break };
                if frame.next < frame.parents.len() {
                    let parent = frame.parents[frame.next];
                    frame.next += 1;
                    Some(parent)
                } else {
                    None
                }
            };
            let Some((parent, role)) = step else {
                self.frames.pop();
                let element = self.chain.pop().unwrap();
                self.chain_ids.remove(&element.node);
                continue;
            };
            if self.chain_ids.contains(&parent) {
                continue;
            }
            if let Some(cached) = self.table.get(&(parent, role, self.depth)) {
                self.join_cached(cached);
                continue;
            }
            self.enter(parent, role);
        }
    }

    /// Visit a node: record it on the chain, emit whatever the visit
    /// produces, and queue the next steps backward.
    fn enter(&mut self, node: NodeId, role: Role) {
        let cpg = self.ctx.cpg;
        let resolved = element_resolved(cpg, self.ctx.registry, node);
        self.chain.push(PathElement { node, resolved });
        self.chain_ids.insert(node);
        if self.ctx.sources.contains(&node) {
            self.emit_here(ResultKind::Complete);
        }
        let kind = cpg.get(node).map(|n| n.kind);
        let mut parents: Vec<(NodeId, Role)> = Vec::new();
        match role {
            Role::EntryUse => {
                if kind == Some(NodeKind::ParameterIn) {
                    self.emit_here(ResultKind::Partial);
                } else {
                    parents = self.materialized_parents(node);
                }
            }
            Role::ValueAnchor => {
                if callee_is_internal(cpg, node) {
                    // The value comes out of a defined method; stop here
                    // and let the coordinator continue at its return.
                    self.emit_here(ResultKind::Partial);
                } else {
                    for arg in implied_value_parents(cpg, self.ctx.registry, node) {
                        parents.push((arg, arrival_role(cpg, arg)));
                    }
                    parents.extend(self.materialized_parents(node));
                }
            }
            Role::PostDef => {
                // The callee may have written this argument, so the walk
                // offers the boundary to the coordinator and also keeps
                // following the value the argument already held.
                self.emit_here(ResultKind::Partial);
                for arg in implied_same_call_parents(cpg, self.ctx.registry, node) {
                    parents.push((arg, arrival_role(cpg, arg)));
                }
                parents.extend(self.materialized_parents(node));
            }
        }
        dedup_preserving(&mut parents);
        self.frames.push(Frame { parents, next: 0 });
    }

    fn materialized_parents(&self, node: NodeId) -> Vec<(NodeId, Role)> {
        let cpg = self.ctx.cpg;
        let registry = self.ctx.registry;
        cpg.in_neighbors(node, EdgeType::Ddg)
            .unwrap_or(&[])
            .iter()
            .filter(|&&p| is_valid_edge(cpg, registry, p, node) != Validity::Invalid)
            .map(|&p| (p, def_role(cpg, p)))
            .collect()
    }

    /// Splice cached pieces from a finished walk onto the current chain.
    fn join_cached(&mut self, cached: Vec<Piece>) {
        for (kind, piece) in cached {
            let through = &piece[..piece.len() - 1];
            if through.iter().any(|e| self.chain_ids.contains(&e.node)) {
                continue;
            }
            let mut joined = piece;
            joined.extend(self.chain.iter().rev().cloned());
            self.emit(kind, joined);
        }
    }

    fn emit_here(&mut self, kind: ResultKind) {
        let piece: Vec<PathElement> = self.chain.iter().rev().cloned().collect();
        self.emit(kind, piece);
    }

    fn emit(&mut self, kind: ResultKind, piece: Vec<PathElement>) {
        if piece.iter().all(|e| !self.suffix_ids.contains(&e.node)) {
            let mut path = piece.clone();
            path.extend_from_slice(self.suffix);
            self.results.push(TaintResult { kind, path, depth: self.depth });
        }
        self.pieces.push((kind, piece));
    }
}

/// How a node behaves when the walk arrives over a materialized edge:
/// calls anchor their produced value, argument sources were boundary
/// definitions, anything else is a plain read.
fn def_role(cpg: &Cpg, node: NodeId) -> Role {
    if cpg.get(node).map(|n| n.kind) == Some(NodeKind::Call) {
        Role::ValueAnchor
    } else if cpg.is_call_argument(node) {
        Role::PostDef
    } else {
        Role::EntryUse
    }
}

/// How a node behaves when the walk arrives over an implied step: the
/// value flowing in before the call runs.
fn arrival_role(cpg: &Cpg, node: NodeId) -> Role {
    if cpg.get(node).map(|n| n.kind) == Some(NodeKind::Call) {
        Role::ValueAnchor
    } else {
        Role::EntryUse
    }
}

/// Whether a path element's value is fully known without expanding a
/// callee body.
fn element_resolved(cpg: &Cpg, registry: &SemanticsRegistry, node: NodeId) -> bool {
    let kind = cpg.get(node).map(|n| n.kind);
    if cpg.is_call_argument(node) {
        if kind == Some(NodeKind::Call) {
            false
        } else {
            !is_output_arg(cpg, registry, node)
        }
    } else {
        !(kind == Some(NodeKind::Call) && callee_is_internal(cpg, node))
    }
}

fn dedup_preserving(parents: &mut Vec<(NodeId, Role)>) {
    let mut seen = BTreeSet::new();
    parents.retain(|p| seen.insert(*p));
}
