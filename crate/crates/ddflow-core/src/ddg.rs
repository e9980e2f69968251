//! Data-dependence edges: which definition of a variable reaches which use.
//!
//! The builder runs a reaching-definitions pass over the statement-level
//! CFG. Each statement is replayed as an ordered list of events in
//! evaluation order (arguments ascending, nested calls first):
//!
//! - an Identifier in argument position reads its variable,
//! - an assignment to a plain Identifier redefines the variable outright
//!   (anchored at the assignment call), while writes through index or
//!   field accesses only add a definition of the root container variable,
//! - a call may mutate any Identifier it receives, so each such argument
//!   adds a definition of that variable anchored at the argument node
//!   itself. Operator callees are pure and add none.
//!
//! Materialized edges: definition to use (labeled with the variable),
//! return value to MethodReturn, and definitions live at exit to the
//! matching ParameterOut. Flow across call sites is not materialized
//! here; the query engine derives it from callee semantics.

use crate::cpg::{Cpg, CpgError, EdgeKind, EdgeType, NodeId, NodeKind};
use crate::ops;
use std::collections::{BTreeMap, BTreeSet};

type Defs = BTreeMap<String, BTreeSet<NodeId>>;

#[derive(Clone, Debug)]
enum Event {
    Use { var: String, node: NodeId },
    StrongDef { var: String, anchor: NodeId },
    WeakDef { var: String, anchor: NodeId },
}

pub fn build_ddg(cpg: &mut Cpg, method: NodeId) -> Result<(), CpgError> {
    let exit = cpg
        .method_return_of(method)
        .ok_or(CpgError::MissingLayer { layer: "CFG", method })?;
    if cpg.out_neighbors(method, EdgeType::Cfg)?.is_empty() {
        return Err(CpgError::MissingLayer { layer: "CFG", method });
    }

    let mut members: BTreeSet<NodeId> = BTreeSet::new();
    members.insert(method);
    members.insert(exit);
    for n in cpg.nodes_of_method(method) {
        let id = n.id;
        if !cpg.out_neighbors(id, EdgeType::Cfg).unwrap_or(&[]).is_empty()
            || !cpg.in_neighbors(id, EdgeType::Cfg).unwrap_or(&[]).is_empty()
        {
            members.insert(id);
        }
    }

    let mut events: BTreeMap<NodeId, Vec<Event>> = BTreeMap::new();
    for &n in &members {
        events.insert(n, events_for(cpg, n));
    }

    let mut seed: Defs = Defs::new();
    for p in cpg.parameters_of(method) {
        let node = cpg.node(p)?;
        seed.entry(node.name.clone()).or_default().insert(p);
    }

    // Reaching definitions to a fixpoint, merging by union.
    let mut outs: BTreeMap<NodeId, Defs> = BTreeMap::new();
    let in_of = |cpg: &Cpg, outs: &BTreeMap<NodeId, Defs>, n: NodeId, seed: &Defs| -> Defs {
        if n == method {
            return seed.clone();
        }
        let mut merged = Defs::new();
        for p in cpg.in_neighbors(n, EdgeType::Cfg).unwrap_or(&[]) {
            if let Some(out) = outs.get(p) {
                for (var, defs) in out {
                    merged.entry(var.clone()).or_default().extend(defs);
                }
            }
        }
        merged
    };
    let mut work: BTreeSet<NodeId> = members.clone();
    while let Some(&n) = work.iter().next() {
        work.remove(&n);
        let mut state = in_of(cpg, &outs, n, &seed);
        apply_events(&events[&n], &mut state);
        if outs.get(&n) != Some(&state) {
            outs.insert(n, state);
            for &s in cpg.out_neighbors(n, EdgeType::Cfg).unwrap_or(&[]) {
                if members.contains(&s) {
                    work.insert(s);
                }
            }
        }
    }

    // Emission: replay each statement against its entry state and record
    // one edge per live definition at each read.
    let mut ddg_edges: Vec<(NodeId, NodeId, String)> = Vec::new();
    for &n in &members {
        let mut live = in_of(cpg, &outs, n, &seed);
        for ev in &events[&n] {
            match ev {
                Event::Use { var, node } => {
                    if let Some(defs) = live.get(var) {
                        for &d in defs {
                            ddg_edges.push((d, *node, var.clone()));
                        }
                    }
                }
                _ => apply_events(std::slice::from_ref(ev), &mut live),
            }
        }
    }

    // Return values feed the MethodReturn node.
    for ret in cpg
        .nodes_of_method(method)
        .filter(|n| n.kind == NodeKind::Return)
        .map(|n| n.id)
        .collect::<Vec<_>>()
    {
        for &value in cpg.out_neighbors(ret, EdgeType::Ast)? {
            let v = cpg.node(value)?;
            let label = if v.kind == NodeKind::Identifier {
                v.name.clone()
            } else {
                v.code.clone()
            };
            ddg_edges.push((value, exit, label));
        }
    }

    // Definitions of parameter variables that survive to the exit feed the
    // matching output parameter.
    let exit_in = in_of(cpg, &outs, exit, &seed);
    for p in cpg.parameters_of(method) {
        let param = cpg.node(p)?;
        let Some(out_param) = cpg.parameter_out_at(method, param.argument_index) else {
            continue;
        };
        if let Some(defs) = exit_in.get(&param.name) {
            for &d in defs {
                ddg_edges.push((d, out_param, param.name.clone()));
            }
        }
    }

    for (src, dst, var) in ddg_edges {
        cpg.add_edge(src, dst, EdgeKind::Ddg(var))?;
    }
    Ok(())
}

fn apply_events(events: &[Event], state: &mut Defs) {
    for ev in events {
        match ev {
            Event::Use { .. } => {}
            Event::StrongDef { var, anchor } => {
                state.insert(var.clone(), BTreeSet::from([*anchor]));
            }
            Event::WeakDef { var, anchor } => {
                state.entry(var.clone()).or_default().insert(*anchor);
            }
        }
    }
}

fn events_for(cpg: &Cpg, node: NodeId) -> Vec<Event> {
    let Some(n) = cpg.get(node) else { return Vec::new() };
    let mut evs = Vec::new();
    match n.kind {
        NodeKind::Identifier if under_return(cpg, node) => {
            evs.push(Event::Use { var: n.name.clone(), node });
        }
        NodeKind::Identifier | NodeKind::Literal | NodeKind::Call => {
            walk_expr(cpg, node, &mut evs);
        }
        _ => {}
    }
    evs
}

fn under_return(cpg: &Cpg, node: NodeId) -> bool {
    cpg.in_neighbors(node, EdgeType::Ast)
        .unwrap_or(&[])
        .iter()
        .any(|p| cpg.get(*p).map(|n| n.kind) == Some(NodeKind::Return))
}

fn walk_expr(cpg: &Cpg, node: NodeId, evs: &mut Vec<Event>) {
    let Some(n) = cpg.get(node) else { return };
    match n.kind {
        NodeKind::Identifier => {
            if cpg.is_call_argument(node) {
                evs.push(Event::Use { var: n.name.clone(), node });
            }
        }
        NodeKind::Call => {
            let callee = cpg.callee_full_name(node).unwrap_or("").to_string();
            if callee == ops::OP_ASSIGNMENT {
                let target = cpg.argument_at(node, 1);
                let simple_target = target.and_then(|t| {
                    let tn = cpg.get(t)?;
                    (tn.kind == NodeKind::Identifier).then(|| tn.name.clone())
                });
                if let Some(t) = target {
                    if simple_target.is_none() {
                        walk_expr(cpg, t, evs);
                    }
                }
                if let Some(v) = cpg.argument_at(node, 2) {
                    walk_expr(cpg, v, evs);
                }
                if let Some(var) = simple_target {
                    evs.push(Event::StrongDef { var, anchor: node });
                } else if let Some(var) = target.and_then(|t| root_variable(cpg, t)) {
                    evs.push(Event::WeakDef { var, anchor: node });
                }
            } else {
                let args = cpg.arguments(node);
                for &arg in &args {
                    walk_expr(cpg, arg, evs);
                }
                if !ops::is_operator(&callee) {
                    for &arg in &args {
                        if let Some(a) = cpg.get(arg) {
                            if a.kind == NodeKind::Identifier {
                                evs.push(Event::WeakDef { var: a.name.clone(), anchor: arg });
                            }
                        }
                    }
                }
            }
        }
        _ => {}
    }
}

/// Root container variable of an index or field access chain, e.g. `a` for
/// `a[i].b`. None when the chain does not bottom out at an Identifier.
fn root_variable(cpg: &Cpg, mut node: NodeId) -> Option<String> {
    loop {
        let n = cpg.get(node)?;
        match n.kind {
            NodeKind::Identifier => return Some(n.name.clone()),
            NodeKind::Call => {
                let callee = cpg.callee_full_name(node)?;
                if callee == ops::OP_INDEX_ACCESS || callee == ops::OP_FIELD_ACCESS {
                    node = cpg.argument_at(node, 1)?;
                } else {
                    return None;
                }
            }
            _ => return None,
        }
    }
}
