//! Control-dependence edges, derived from the CFG via postdominators.
//!
//! A node N is control dependent on a branch node A when A has a CFG
//! successor B such that N postdominates B but does not postdominate A
//! itself. Straight-line code yields no edges; an `if` makes its branch
//! statements depend on the control structure; a loop additionally makes
//! the control structure (and its condition) depend on itself.

use crate::cpg::{Cpg, CpgError, EdgeKind, EdgeType, NodeId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub fn build_cdg(cpg: &mut Cpg, method: NodeId) -> Result<(), CpgError> {
    let exit = cpg
        .method_return_of(method)
        .ok_or(CpgError::MissingLayer { layer: "CFG", method })?;
    if cpg.out_neighbors(method, EdgeType::Cfg)?.is_empty() {
        return Err(CpgError::MissingLayer { layer: "CFG", method });
    }

    let mut members: BTreeSet<NodeId> = BTreeSet::new();
    members.insert(method);
    members.insert(exit);
    let in_flow: Vec<NodeId> = cpg
        .nodes_of_method(method)
        .map(|n| n.id)
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|&id| {
            !cpg.out_neighbors(id, EdgeType::Cfg).unwrap_or(&[]).is_empty()
                || !cpg.in_neighbors(id, EdgeType::Cfg).unwrap_or(&[]).is_empty()
        })
        .collect();
    members.extend(in_flow);

    // Every flow node must be able to reach the exit.
    let mut reached: BTreeSet<NodeId> = BTreeSet::new();
    let mut queue = VecDeque::from([exit]);
    reached.insert(exit);
    while let Some(n) = queue.pop_front() {
        for &p in cpg.in_neighbors(n, EdgeType::Cfg)? {
            if members.contains(&p) && reached.insert(p) {
                queue.push_back(p);
            }
        }
    }
    if let Some(&stranded) = members.iter().find(|m| !reached.contains(m)) {
        return Err(CpgError::ExitUnreachable(method, stranded));
    }

    let nodes: Vec<NodeId> = members.iter().copied().collect();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let exit_idx = index[&exit];
    let succs: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&n| {
            cpg.out_neighbors(n, EdgeType::Cfg)
                .unwrap_or(&[])
                .iter()
                .filter_map(|d| index.get(d).copied())
                .collect()
        })
        .collect();

    // Postdominator sets: exit postdominates only itself, everything else
    // starts at the full set and shrinks to a fixpoint.
    let all: BTreeSet<usize> = (0..nodes.len()).collect();
    let mut podom: Vec<BTreeSet<usize>> = vec![all.clone(); nodes.len()];
    podom[exit_idx] = BTreeSet::from([exit_idx]);
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..nodes.len() {
            if i == exit_idx {
                continue;
            }
            let mut next = succs[i]
                .iter()
                .map(|&s| podom[s].clone())
                .reduce(|acc, s| acc.intersection(&s).copied().collect())
                .unwrap_or_else(|| all.clone());
            next.insert(i);
            if next != podom[i] {
                podom[i] = next;
                changed = true;
            }
        }
    }

    let mut deps: Vec<(NodeId, NodeId)> = Vec::new();
    for (a, a_succs) in succs.iter().enumerate() {
        for &b in a_succs {
            for &n in &podom[b] {
                if n == a || !podom[a].contains(&n) {
                    deps.push((nodes[a], nodes[n]));
                }
            }
        }
    }
    for (src, dst) in deps {
        cpg.add_edge(src, dst, EdgeKind::Cdg)?;
    }
    Ok(())
}
