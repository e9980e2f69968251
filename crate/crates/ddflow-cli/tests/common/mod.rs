//! Shared helpers for the integration suites: a brute-force reference
//! implementation of the taint query and seeded random generators for
//! programs and rule files.
//!
//! The reference implementation deliberately shares no traversal code
//! with the engine. It enumerates every acyclic backward path by plain
//! recursion, one task at a time, with no result cache and no worker
//! pool, so disagreements point at the engine's scheduling, caching, or
//! pruning rather than at a shared mistake.

#![allow(dead_code)]

use ddflow_core::cpg::{Cpg, EdgeType, NodeId, NodeKind};
use ddflow_core::engine::FlowReport;
use ddflow_core::semantics::validity::{
    callee_is_internal, implied_same_call_parents, implied_value_parents, is_output_arg,
    is_valid_edge, Validity,
};
use ddflow_core::semantics::SemanticsRegistry;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn flow_map(report: &FlowReport) -> BTreeMap<Vec<NodeId>, bool> {
    report
        .flows
        .iter()
        .map(|f| (f.elements.iter().map(|e| e.id).collect(), f.widened))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Mode {
    /// Reading the value a node holds on entry to its statement.
    Use,
    /// An argument a finished call may have rewritten.
    Post,
    /// The value a call produces.
    Value,
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Elem {
    node: NodeId,
    resolved: bool,
}

struct Ref<'a> {
    cpg: &'a Cpg,
    registry: &'a SemanticsRegistry,
    sources: &'a BTreeSet<NodeId>,
}

/// Reference query: same inputs and outputs as `run_query`, computed by
/// exhaustive path enumeration. Returns element-id sequences mapped to
/// their widened flag.
pub fn reference_flows(
    cpg: &Cpg,
    registry: &SemanticsRegistry,
    sources: &BTreeSet<NodeId>,
    sinks: &[NodeId],
    max_call_depth: u32,
) -> BTreeMap<Vec<NodeId>, bool> {
    assert!(max_call_depth >= 1);
    let r = Ref { cpg, registry, sources };
    let mut flows: BTreeMap<Vec<NodeId>, bool> = BTreeMap::new();
    let mut seen: BTreeSet<(NodeId, Vec<NodeId>, u32)> = BTreeSet::new();
    let mut queue: VecDeque<(NodeId, Vec<Elem>, u32)> = VecDeque::new();

    let mut starts = sinks.to_vec();
    starts.sort();
    starts.dedup();
    for sink in starts {
        if cpg.get(sink).is_none() {
            continue;
        }
        if seen.insert((sink, Vec::new(), 0)) {
            queue.push_back((sink, Vec::new(), 0));
        }
    }

    while let Some((start, suffix, depth)) = queue.pop_front() {
        let mut emitted: Vec<(bool, Vec<Elem>)> = Vec::new();
        let mut chain = Vec::new();
        r.walk(start, entry_mode(cpg, start), &mut chain, &mut emitted);

        let suffix_ids: BTreeSet<NodeId> = suffix.iter().map(|e| e.node).collect();
        for (complete, piece) in emitted {
            if piece.iter().any(|e| suffix_ids.contains(&e.node)) {
                continue;
            }
            let mut path = piece;
            path.extend_from_slice(&suffix);
            if complete {
                note(&mut flows, &path, false);
            }
            let targets = r.continuations(path[0]);
            if targets.is_empty() {
                continue;
            }
            if depth + 1 >= max_call_depth {
                note(&mut flows, &path, true);
                continue;
            }
            let ids: Vec<NodeId> = path.iter().map(|e| e.node).collect();
            for t in targets {
                if ids.contains(&t) {
                    continue;
                }
                if seen.insert((t, ids.clone(), depth + 1)) {
                    queue.push_back((t, path.clone(), depth + 1));
                }
            }
        }
    }
    flows
}

fn note(flows: &mut BTreeMap<Vec<NodeId>, bool>, path: &[Elem], widened: bool) {
    let ids: Vec<NodeId> = path.iter().map(|e| e.node).collect();
    flows.entry(ids).and_modify(|w| *w = *w && widened).or_insert(widened);
}

fn entry_mode(cpg: &Cpg, node: NodeId) -> Mode {
    if cpg.get(node).map(|n| n.kind) == Some(NodeKind::Call) {
        Mode::Value
    } else {
        Mode::Use
    }
}

impl Ref<'_> {
    /// Enumerate every acyclic backward path from `node`, appending each
    /// emission to `out` as (completes-at-a-source, sink-last elements).
    fn walk(&self, node: NodeId, mode: Mode, chain: &mut Vec<Elem>, out: &mut Vec<(bool, Vec<Elem>)>) {
        let cpg = self.cpg;
        chain.push(Elem { node, resolved: self.known_here(node) });
        let snapshot = |chain: &[Elem]| chain.iter().rev().copied().collect::<Vec<_>>();
        if self.sources.contains(&node) {
            out.push((true, snapshot(chain)));
        }
        let kind = cpg.get(node).map(|n| n.kind);
        let mut next: Vec<(NodeId, Mode)> = Vec::new();
        match mode {
            Mode::Use => {
                if kind == Some(NodeKind::ParameterIn) {
                    out.push((false, snapshot(chain)));
                } else {
                    next = self.stored_steps(node);
                }
            }
            Mode::Value => {
                if callee_is_internal(cpg, node) {
                    out.push((false, snapshot(chain)));
                } else {
                    for arg in implied_value_parents(cpg, self.registry, node) {
                        next.push((arg, entry_mode(cpg, arg)));
                    }
                    next.extend(self.stored_steps(node));
                }
            }
            Mode::Post => {
                out.push((false, snapshot(chain)));
                for arg in implied_same_call_parents(cpg, self.registry, node) {
                    next.push((arg, entry_mode(cpg, arg)));
                }
                next.extend(self.stored_steps(node));
            }
        }
        let mut unique = BTreeSet::new();
        for (parent, parent_mode) in next {
            if !unique.insert((parent, parent_mode)) {
                continue;
            }
            if chain.iter().any(|e| e.node == parent) {
                continue;
            }
            self.walk(parent, parent_mode, chain, out);
        }
        chain.pop();
    }

    fn stored_steps(&self, node: NodeId) -> Vec<(NodeId, Mode)> {
        let cpg = self.cpg;
        let mut steps = Vec::new();
        for &p in cpg.in_neighbors(node, EdgeType::Ddg).unwrap_or(&[]) {
            if is_valid_edge(cpg, self.registry, p, node) == Validity::Invalid {
                continue;
            }
            let mode = if cpg.get(p).map(|n| n.kind) == Some(NodeKind::Call) {
                Mode::Value
            } else if cpg.is_call_argument(p) {
                Mode::Post
            } else {
                Mode::Use
            };
            steps.push((p, mode));
        }
        steps
    }

    fn known_here(&self, node: NodeId) -> bool {
        let cpg = self.cpg;
        let kind = cpg.get(node).map(|n| n.kind);
        if cpg.is_call_argument(node) {
            if kind == Some(NodeKind::Call) {
                false
            } else {
                !is_output_arg(cpg, self.registry, node)
            }
        } else {
            !(kind == Some(NodeKind::Call) && callee_is_internal(cpg, node))
        }
    }

    /// Where a finished path may continue in a neighboring method.
    fn continuations(&self, head: Elem) -> Vec<NodeId> {
        let cpg = self.cpg;
        let Some(node) = cpg.get(head.node) else {
            return Vec::new();
        };
        let mut targets = Vec::new();
        if node.kind == NodeKind::ParameterIn {
            let mut call_sites: Vec<NodeId> = cpg.callers_of(node.method_id).to_vec();
            for &referrer in cpg.in_neighbors(node.method_id, EdgeType::Ref).unwrap_or(&[]) {
                if cpg.get(referrer).map(|n| n.argument_index) == Some(0) {
                    if let Some(call) = cpg.enclosing_call(referrer) {
                        call_sites.push(call);
                    }
                }
            }
            for call in call_sites {
                if let Some(arg) = cpg.argument_at(call, node.argument_index) {
                    targets.push(arg);
                }
            }
        } else if !head.resolved && node.kind == NodeKind::Call {
            for m in self.bodies_entered(head.node) {
                if let Some(exit) = cpg.method_return_of(m) {
                    targets.push(exit);
                }
            }
        } else if !head.resolved && cpg.is_call_argument(head.node) {
            let call = cpg.enclosing_call(head.node).unwrap();
            for m in self.bodies_entered(call) {
                if let Some(po) = cpg.parameter_out_at(m, node.argument_index) {
                    targets.push(po);
                }
            }
        }
        targets.sort();
        targets.dedup();
        targets
    }

    fn bodies_entered(&self, call: NodeId) -> Vec<NodeId> {
        let cpg = self.cpg;
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
}

/// External methods every generated program declares, with their arity.
pub const EXTERNS: &[(&str, usize)] = &[
    ("Src.get", 0),
    ("Snk.put", 1),
    ("U.f1", 1),
    ("U.f2", 2),
    ("O.mix", 1),
    ("Clean.wash", 1),
];

struct ProgramGen<'r, R: Rng> {
    rng: &'r mut R,
    lines: Vec<String>,
    budget: usize,
}

/// A random program over a fixed extern vocabulary: up to six methods
/// and a few dozen statements with branches, loops, helper calls, and at
/// least one `Src.get` and one `Snk.put` occurrence.
pub fn random_program<R: Rng>(rng: &mut R) -> String {
    let helper_count = rng.gen_range(0..=3);
    let arities: Vec<usize> = (0..helper_count).map(|_| rng.gen_range(0..=2)).collect();
    let budget = rng.gen_range(6..=24);
    let mut gen = ProgramGen { rng, lines: Vec::new(), budget };

    for (name, arity) in EXTERNS {
        let params: Vec<String> = (0..*arity).map(|i| format!("a{i}")).collect();
        gen.lines.push(format!("extern {name}({});", params.join(", ")));
    }
    let shares = gen.split_budget(helper_count + 1);
    for (h, arity) in arities.iter().enumerate() {
        let params: Vec<String> = (0..*arity).map(|i| format!("p{i}")).collect();
        gen.lines.push(format!("fn h{h}({}) {{", params.join(", ")));
        gen.body(shares[h], params, &arities, 1, true);
        gen.lines.push("}".into());
    }
    gen.lines.push("fn main() {".into());
    gen.body(shares[helper_count].max(2), Vec::new(), &arities, 1, false);
    gen.lines.push("}".into());
    gen.lines.join("\n") + "\n"
}

impl<R: Rng> ProgramGen<'_, R> {
    fn split_budget(&mut self, ways: usize) -> Vec<usize> {
        let mut shares = vec![1; ways];
        for _ in ways..self.budget {
            let i = self.rng.gen_range(0..ways);
            shares[i] += 1;
        }
        shares
    }

    fn body(&mut self, quota: usize, params: Vec<String>, arities: &[usize], indent: usize, in_helper: bool) {
        let mut vars = params;
        let mut left = quota;
        while left > 0 {
            left -= 1;
            self.statement(&mut left, &mut vars, arities, indent);
        }
        let pad = "    ".repeat(indent);
        if in_helper {
            if self.rng.gen_bool(0.6) {
                let value = self.read_expr(&vars, 1);
                self.lines.push(format!("{pad}return {value};"));
            }
            return;
        }
        // Guarantee the query endpoints occur somewhere in the program.
        fn used(lines: &[String], needle: &str) -> bool {
            lines
                .iter()
                .filter(|l| !l.trim_start().starts_with("extern"))
                .any(|l| l.contains(needle))
        }
        if !used(&self.lines, "Src.get(") {
            let v = self.fresh(&mut vars);
            self.lines.push(format!("{pad}{v} = Src.get();"));
        }
        if !used(&self.lines, "Snk.put(") {
            let arg = self.read_expr(&vars, 0);
            self.lines.push(format!("{pad}Snk.put({arg});"));
        }
    }

    fn statement(&mut self, quota: &mut usize, vars: &mut Vec<String>, arities: &[usize], indent: usize) {
        let pad = "    ".repeat(indent);
        let deeper = indent < 3;
        match self.rng.gen_range(0..10) {
            0 if deeper && *quota >= 2 => {
                let cond = self.cond_expr(vars);
                self.lines.push(format!("{pad}if ({cond}) {{"));
                let inner = self.take(quota);
                let mut branch_vars = vars.clone();
                for _ in 0..inner {
                    self.statement(&mut 0, &mut branch_vars, arities, indent + 1);
                }
                if self.rng.gen_bool(0.4) {
                    self.lines.push(format!("{pad}}} else {{"));
                    let inner = self.take(quota);
                    let mut else_vars = vars.clone();
                    for _ in 0..inner {
                        self.statement(&mut 0, &mut else_vars, arities, indent + 1);
                    }
                }
                self.lines.push(format!("{pad}}}"));
            }
            1 if deeper && *quota >= 2 => {
                let cond = self.cond_expr(vars);
                self.lines.push(format!("{pad}while ({cond}) {{"));
                let inner = self.take(quota);
                let mut loop_vars = vars.clone();
                for _ in 0..inner {
                    self.statement(&mut 0, &mut loop_vars, arities, indent + 1);
                }
                self.lines.push(format!("{pad}}}"));
            }
            2 => {
                let arg = self.read_expr(vars, 1);
                self.lines.push(format!("{pad}Snk.put({arg});"));
            }
            3 if !vars.is_empty() => {
                let base = self.pick(vars);
                let value = self.value_expr(vars, arities, 1);
                if self.rng.gen_bool(0.5) {
                    let index = self.read_expr(vars, 0);
                    self.lines.push(format!("{pad}{base}[{index}] = {value};"));
                } else {
                    self.lines.push(format!("{pad}{base}.data = {value};"));
                }
            }
            4 => {
                let expr = self.call_expr(vars, arities);
                self.lines.push(format!("{pad}{expr};"));
            }
            _ => {
                let value = self.value_expr(vars, arities, 2);
                let target = if !vars.is_empty() && self.rng.gen_bool(0.45) {
                    self.pick(vars)
                } else {
                    self.fresh(vars)
                };
                self.lines.push(format!("{pad}{target} = {value};"));
            }
        }
    }

    fn take(&mut self, quota: &mut usize) -> usize {
        let inner = self.rng.gen_range(1..=(*quota).clamp(1, 3));
        *quota = quota.saturating_sub(inner);
        inner
    }

    fn fresh(&mut self, vars: &mut Vec<String>) -> String {
        let name = format!("v{}", vars.len());
        vars.push(name.clone());
        name
    }

    fn pick(&mut self, vars: &[String]) -> String {
        vars[self.rng.gen_range(0..vars.len())].clone()
    }

    fn value_expr(&mut self, vars: &[String], arities: &[usize], depth: usize) -> String {
        match self.rng.gen_range(0..10) {
            0 | 1 => self.call_expr(vars, arities),
            2 => "Src.get()".into(),
            3 => "new()".into(),
            4 if depth > 0 => {
                let lhs = self.read_expr(vars, depth - 1);
                let mut rhs = self.read_expr(vars, depth - 1);
                if rhs == lhs {
                    rhs = format!("{}", self.rng.gen_range(0..10));
                }
                let op = ["+", "-", "*", "==", "<"][self.rng.gen_range(0..5)];
                format!("{lhs} {op} {rhs}")
            }
            5 if !vars.is_empty() => format!("{}[{}]", self.pick(vars), self.read_expr(vars, 0)),
            6 if !vars.is_empty() => format!("{}.data", self.pick(vars)),
            _ => self.read_expr(vars, depth),
        }
    }

    fn read_expr(&mut self, vars: &[String], depth: usize) -> String {
        if !vars.is_empty() && self.rng.gen_bool(0.7) {
            return vars[self.rng.gen_range(0..vars.len())].clone();
        }
        if depth > 0 && self.rng.gen_bool(0.3) {
            return "Src.get()".into();
        }
        format!("{}", self.rng.gen_range(0..100))
    }

    fn cond_expr(&mut self, vars: &[String]) -> String {
        if !vars.is_empty() && self.rng.gen_bool(0.5) {
            let v = vars[self.rng.gen_range(0..vars.len())].clone();
            format!("{v} < {}", self.rng.gen_range(1..10))
        } else {
            format!("{} < {}", self.rng.gen_range(0..10), self.rng.gen_range(0..10))
        }
    }

    fn call_expr(&mut self, vars: &[String], arities: &[usize]) -> String {
        let helper_calls = arities.len();
        let receiver_ok = !vars.is_empty();
        let choices = 3 + helper_calls + receiver_ok as usize;
        let c = self.rng.gen_range(0..choices);
        match c {
            0 => format!("U.f1({})", self.read_expr(vars, 0)),
            1 => format!("U.f2({}, {})", self.read_expr(vars, 0), self.read_expr(vars, 0)),
            2 => format!("Clean.wash({})", self.read_expr(vars, 0)),
            _ if c - 3 < helper_calls => {
                let h = c - 3;
                let args: Vec<String> = (0..arities[h]).map(|_| self.read_expr(vars, 0)).collect();
                format!("h{h}({})", args.join(", "))
            }
            _ => format!("{}.mix({})", self.pick(vars), self.read_expr(vars, 0)),
        }
    }
}

/// A random rule file over a subset of the extern vocabulary.
pub fn random_semantics<R: Rng>(rng: &mut R) -> String {
    let mut lines = Vec::new();
    for (name, arity) in EXTERNS {
        if !rng.gen_bool(0.4) {
            continue;
        }
        lines.push(random_rule(rng, name, *arity));
    }
    lines.join("\n") + "\n"
}

/// One rule line for `name`: a sanitizer, a passthrough, or a few random
/// position mappings.
pub fn random_rule<R: Rng>(rng: &mut R, name: &str, arity: usize) -> String {
    match rng.gen_range(0..4) {
        0 => format!("\"{name}\""),
        1 => format!("\"{name}\" PASSTHROUGH"),
        _ => {
            let n = rng.gen_range(1..=3);
            let mut tokens = Vec::new();
            for _ in 0..n {
                let src = rng.gen_range(0..=arity as i64);
                let dst = rng.gen_range(-1..=arity as i64);
                tokens.push(format!("{src}->{dst}"));
            }
            format!("\"{name}\" {}", tokens.join(" "))
        }
    }
}
