//! Summary-driven edge filtering and the call-site steps summaries imply.
//!
//! Materialized data-dependence edges over-approximate: they assume every
//! call propagates everything. At query time each traversed edge is
//! checked against the callee summaries, and flow through a call site
//! (argument to return value, argument to argument) is derived here
//! instead of being stored in the graph.

use super::{SemView, SemanticsRegistry};
use crate::cpg::{Cpg, NodeId, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    /// Traversable, but the destination may also receive its value from
    /// the call it belongs to, which has to be expanded separately.
    ValidUnresolved,
    Invalid,
}

fn view<'a>(cpg: &Cpg, reg: &'a SemanticsRegistry, call: NodeId) -> Option<SemView<'a>> {
    let callee = cpg.callee_full_name(call)?;
    let sem = reg.lookup(callee)?;
    Some(SemView { sem, arity: cpg.call_arity(call) })
}

fn arg_index(cpg: &Cpg, node: NodeId) -> i32 {
    cpg.get(node).map(|n| n.argument_index).unwrap_or(-1)
}

/// Whether a materialized definition-to-use edge survives the loaded
/// summaries. Checked rules, in order:
///
/// 1. a Call parent whose summary says the return value is untainted
///    invalidates the edge outright;
/// 2. a destination outside any argument list is always fine;
/// 3. a destination argument fed from outside any argument list is fine
///    but unresolved;
/// 4. between arguments of one call the summary must map the pair;
/// 5. between arguments of different calls the destination's call must
///    actually use that position.
///
/// Absent summaries never invalidate anything.
pub fn is_valid_edge(
    cpg: &Cpg,
    reg: &SemanticsRegistry,
    parent: NodeId,
    child: NodeId,
) -> Validity {
    if cpg.get(parent).map(|n| n.kind) == Some(NodeKind::Call) {
        if let Some(v) = view(cpg, reg, parent) {
            if !v.defines_return() {
                return Validity::Invalid;
            }
        }
    }
    let Some(child_call) = cpg.enclosing_call(child) else {
        return Validity::Valid;
    };
    let Some(parent_call) = cpg.enclosing_call(parent) else {
        return Validity::ValidUnresolved;
    };
    let child_idx = arg_index(cpg, child);
    if parent_call == child_call {
        return match view(cpg, reg, child_call) {
            None => Validity::Valid,
            Some(v) => {
                if v.pair(arg_index(cpg, parent), child_idx) {
                    Validity::Valid
                } else {
                    Validity::Invalid
                }
            }
        };
    }
    match view(cpg, reg, child_call) {
        None => Validity::Valid,
        Some(v) => {
            if v.uses_index(child_idx) {
                Validity::Valid
            } else {
                Validity::Invalid
            }
        }
    }
}

/// Whether the call enclosing `node` may write through this argument.
/// Defined methods are expanded rather than summarized, so their
/// arguments count as written until the expansion says otherwise.
pub fn is_output_arg(cpg: &Cpg, reg: &SemanticsRegistry, node: NodeId) -> bool {
    let Some(call) = cpg.enclosing_call(node) else {
        return false;
    };
    if cpg.get(node).map(|n| n.kind) == Some(NodeKind::Call) {
        return true;
    }
    if callee_is_internal(cpg, call) {
        return true;
    }
    match view(cpg, reg, call) {
        None => true,
        Some(v) => v.defines_index(arg_index(cpg, node)),
    }
}

pub fn callee_is_internal(cpg: &Cpg, call: NodeId) -> bool {
    cpg.callee_of(call)
        .and_then(|m| cpg.get(m))
        .map(|n| n.kind == NodeKind::Method)
        .unwrap_or(false)
}

/// Arguments whose taint reaches the call's return value, per summary.
/// Only summarized (external) callees contribute; a defined callee's
/// return is reached by expanding its body instead.
pub fn implied_value_parents(cpg: &Cpg, reg: &SemanticsRegistry, call: NodeId) -> Vec<NodeId> {
    if callee_is_internal(cpg, call) {
        return Vec::new();
    }
    let args = cpg.arguments(call);
    match view(cpg, reg, call) {
        None => args,
        Some(v) => args
            .into_iter()
            .filter(|&a| v.pair(arg_index(cpg, a), -1))
            .collect(),
    }
}

/// Sibling arguments whose taint reaches `node` through the enclosing
/// call, e.g. `src` tainting `dst` in a copy. External callees only.
pub fn implied_same_call_parents(
    cpg: &Cpg,
    reg: &SemanticsRegistry,
    node: NodeId,
) -> Vec<NodeId> {
    let Some(call) = cpg.enclosing_call(node) else {
        return Vec::new();
    };
    if callee_is_internal(cpg, call) {
        return Vec::new();
    }
    let j = arg_index(cpg, node);
    let args = cpg.arguments(call);
    match view(cpg, reg, call) {
        None => args.into_iter().filter(|&a| a != node).collect(),
        Some(v) => args
            .into_iter()
            .filter(|&a| a != node && v.pair(arg_index(cpg, a), j))
            .collect(),
    }
}
