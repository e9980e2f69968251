//! The code property graph: typed nodes, labeled edges, and indexed
//! adjacency for every layer the analysis touches.
//!
//! One [`Cpg`] instance holds all layers at once; edges are distinguished by
//! [`EdgeKind`]. The graph is built by a single writer (a frontend or the
//! JSON loader) and is immutable during query execution, so it can be shared
//! freely across worker threads.

mod serialize;

pub use serialize::{ddg_digest, load_cpg, serialize_cpg};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Identifier of one node. Ids are dense, start at 1, and are never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The node vocabulary. A `Call` node doubles as the value the call
/// produces (what flow mappings address as destination index -1), so there
/// is no separate actual-return node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Method,
    ParameterIn,
    ParameterOut,
    MethodReturn,
    Call,
    Identifier,
    Literal,
    Return,
    ControlStructure,
    Block,
    ExternalMethodStub,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Method => "Method",
            NodeKind::ParameterIn => "ParameterIn",
            NodeKind::ParameterOut => "ParameterOut",
            NodeKind::MethodReturn => "MethodReturn",
            NodeKind::Call => "Call",
            NodeKind::Identifier => "Identifier",
            NodeKind::Literal => "Literal",
            NodeKind::Return => "Return",
            NodeKind::ControlStructure => "ControlStructure",
            NodeKind::Block => "Block",
            NodeKind::ExternalMethodStub => "ExternalMethodStub",
        }
    }

    pub fn from_name(s: &str) -> Option<NodeKind> {
        Some(match s {
            "Method" => NodeKind::Method,
            "ParameterIn" => NodeKind::ParameterIn,
            "ParameterOut" => NodeKind::ParameterOut,
            "MethodReturn" => NodeKind::MethodReturn,
            "Call" => NodeKind::Call,
            "Identifier" => NodeKind::Identifier,
            "Literal" => NodeKind::Literal,
            "Return" => NodeKind::Return,
            "ControlStructure" => NodeKind::ControlStructure,
            "Block" => NodeKind::Block,
            "ExternalMethodStub" => NodeKind::ExternalMethodStub,
            _ => return None,
        })
    }

    /// Method-like nodes own themselves and may carry a fullName.
    pub fn is_method_like(self) -> bool {
        matches!(self, NodeKind::Method | NodeKind::ExternalMethodStub)
    }
}

/// A labeled edge. DDG edges carry the name of the variable that is defined
/// at the source and used at the destination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Ast,
    Cfg,
    Cdg,
    Ddg(String),
    Call,
    Argument,
    Ref,
}

impl EdgeKind {
    pub fn edge_type(&self) -> EdgeType {
        match self {
            EdgeKind::Ast => EdgeType::Ast,
            EdgeKind::Cfg => EdgeType::Cfg,
            EdgeKind::Cdg => EdgeType::Cdg,
            EdgeKind::Ddg(_) => EdgeType::Ddg,
            EdgeKind::Call => EdgeType::Call,
            EdgeKind::Argument => EdgeType::Argument,
            EdgeKind::Ref => EdgeType::Ref,
        }
    }

    pub fn variable(&self) -> Option<&str> {
        match self {
            EdgeKind::Ddg(v) => Some(v),
            _ => None,
        }
    }
}

/// Unlabeled edge discriminant, used as the adjacency-index key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    Ast,
    Cfg,
    Cdg,
    Ddg,
    Call,
    Argument,
    Ref,
}

impl EdgeType {
    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Ast => "AST",
            EdgeType::Cfg => "CFG",
            EdgeType::Cdg => "CDG",
            EdgeType::Ddg => "DDG",
            EdgeType::Call => "CALL",
            EdgeType::Argument => "ARGUMENT",
            EdgeType::Ref => "REF",
        }
    }

    pub fn from_name(s: &str) -> Option<EdgeType> {
        Some(match s {
            "AST" => EdgeType::Ast,
            "CFG" => EdgeType::Cfg,
            "CDG" => EdgeType::Cdg,
            "DDG" => EdgeType::Ddg,
            "CALL" => EdgeType::Call,
            "ARGUMENT" => EdgeType::Argument,
            "REF" => EdgeType::Ref,
            _ => return None,
        })
    }
}

/// One node with its display and indexing attributes.
///
/// `argument_index` is -1 unless the node is reachable via an ARGUMENT edge
/// (0 = receiver, 1..n positional) or is a ParameterIn/ParameterOut, which
/// carry their positional index. `line` is 0 for synthetic nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub code: String,
    pub name: String,
    pub full_name: String,
    pub argument_index: i32,
    pub line: u32,
    pub method_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpgEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

/// Attribute bundle for [`Cpg::add_node`]. Unset attributes default to
/// empty strings, argument index -1, line 0.
#[derive(Debug, Clone)]
pub struct NodeAttrs {
    pub code: String,
    pub name: String,
    pub full_name: String,
    pub argument_index: i32,
    pub line: u32,
    pub method_id: NodeId,
}

impl Default for NodeAttrs {
    fn default() -> Self {
        NodeAttrs {
            code: String::new(),
            name: String::new(),
            full_name: String::new(),
            argument_index: -1,
            line: 0,
            method_id: NodeId(0),
        }
    }
}

impl NodeAttrs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn code(mut self, code: impl Into<String>) -> Self {
        self.code = code.into();
        self
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn full_name(mut self, full_name: impl Into<String>) -> Self {
        self.full_name = full_name.into();
        self
    }

    pub fn argument_index(mut self, idx: i32) -> Self {
        self.argument_index = idx;
        self
    }

    pub fn line(mut self, line: u32) -> Self {
        self.line = line;
        self
    }

    pub fn method(mut self, method: NodeId) -> Self {
        self.method_id = method;
        self
    }
}

#[derive(Debug, Error)]
pub enum CpgError {
    #[error("duplicate method fullName `{0}`")]
    DuplicateFullName(String),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid {kind} edge {src} -> {dst}: {reason}")]
    InvalidEdge {
        kind: &'static str,
        src: NodeId,
        dst: NodeId,
        reason: String,
    },
    #[error("method {0} has no CFG exit reachable from node {1}")]
    ExitUnreachable(NodeId, NodeId),
    #[error("missing {layer} layer for method {method}")]
    MissingLayer { layer: &'static str, method: NodeId },
    #[error("ingest error: {0}")]
    Ingest(String),
}

/// The graph itself. Nodes are stored in id order; adjacency is indexed per
/// (node, edge type) with neighbor lists kept sorted ascending, which makes
/// every traversal order deterministic.
#[derive(Debug, Default, Clone)]
pub struct Cpg {
    nodes: BTreeMap<NodeId, CpgNode>,
    edges: Vec<CpgEdge>,
    edge_set: BTreeSet<(NodeId, NodeId, EdgeKind)>,
    method_index: BTreeMap<String, NodeId>,
    out_adj: BTreeMap<(NodeId, EdgeType), Vec<NodeId>>,
    in_adj: BTreeMap<(NodeId, EdgeType), Vec<NodeId>>,
    next_id: u32,
}

impl Cpg {
    pub fn new() -> Self {
        Cpg {
            next_id: 1,
            ..Default::default()
        }
    }

    /// Inserts a node and returns its fresh id. Method-like nodes with an
    /// unset `method_id` own themselves.
    pub fn add_node(&mut self, kind: NodeKind, attrs: NodeAttrs) -> Result<NodeId, CpgError> {
        if kind.is_method_like() {
            if attrs.full_name.is_empty() {
                return Err(CpgError::Ingest(format!(
                    "{} node requires a nonempty fullName",
                    kind.name()
                )));
            }
            if self.method_index.contains_key(&attrs.full_name) {
                return Err(CpgError::DuplicateFullName(attrs.full_name));
            }
        } else if !attrs.full_name.is_empty() {
            return Err(CpgError::Ingest(format!(
                "{} node must not carry a fullName",
                kind.name()
            )));
        }
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.insert_node(CpgNode {
            id,
            kind,
            code: attrs.code,
            name: attrs.name,
            full_name: attrs.full_name,
            argument_index: attrs.argument_index,
            line: attrs.line,
            method_id: if kind.is_method_like() && attrs.method_id == NodeId(0) {
                id
            } else {
                attrs.method_id
            },
        });
        Ok(id)
    }

    /// Used by the loader to re-create nodes under their serialized ids.
    pub(crate) fn insert_node_with_id(&mut self, node: CpgNode) -> Result<(), CpgError> {
        if self.nodes.contains_key(&node.id) {
            return Err(CpgError::Ingest(format!("duplicate node id {}", node.id)));
        }
        if node.kind.is_method_like() {
            if node.full_name.is_empty() {
                return Err(CpgError::Ingest(format!(
                    "node {}: {} requires a nonempty fullName",
                    node.id,
                    node.kind.name()
                )));
            }
            if self.method_index.contains_key(&node.full_name) {
                return Err(CpgError::DuplicateFullName(node.full_name));
            }
        } else if !node.full_name.is_empty() {
            return Err(CpgError::Ingest(format!(
                "node {}: {} must not carry a fullName",
                node.id,
                node.kind.name()
            )));
        }
        self.next_id = self.next_id.max(node.id.0 + 1);
        self.insert_node(node);
        Ok(())
    }

    fn insert_node(&mut self, node: CpgNode) {
        if node.kind.is_method_like() {
            self.method_index.insert(node.full_name.clone(), node.id);
        }
        self.nodes.insert(node.id, node);
    }

    /// Adds an edge. Adding the exact same (src, dst, kind) triple twice is
    /// a no-op, so construction passes may re-emit edges freely.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, kind: EdgeKind) -> Result<(), CpgError> {
        let Some(_src_node) = self.nodes.get(&src) else {
            return Err(CpgError::UnknownNode(src));
        };
        let Some(dst_node) = self.nodes.get(&dst) else {
            return Err(CpgError::UnknownNode(dst));
        };
        match &kind {
            EdgeKind::Ddg(var) => {
                if var.is_empty() {
                    return Err(CpgError::InvalidEdge {
                        kind: "DDG",
                        src,
                        dst,
                        reason: "empty variable label".into(),
                    });
                }
            }
            EdgeKind::Call => {
                let src_node = &self.nodes[&src];
                if src_node.kind != NodeKind::Call {
                    return Err(CpgError::InvalidEdge {
                        kind: "CALL",
                        src,
                        dst,
                        reason: format!("source is {}, expected Call", src_node.kind.name()),
                    });
                }
                if !dst_node.kind.is_method_like() {
                    return Err(CpgError::InvalidEdge {
                        kind: "CALL",
                        src,
                        dst,
                        reason: format!(
                            "target is {}, expected Method or ExternalMethodStub",
                            dst_node.kind.name()
                        ),
                    });
                }
            }
            EdgeKind::Argument => {
                let src_node = &self.nodes[&src];
                if src_node.kind != NodeKind::Call {
                    return Err(CpgError::InvalidEdge {
                        kind: "ARGUMENT",
                        src,
                        dst,
                        reason: format!("source is {}, expected Call", src_node.kind.name()),
                    });
                }
                if dst_node.argument_index < 0 {
                    return Err(CpgError::InvalidEdge {
                        kind: "ARGUMENT",
                        src,
                        dst,
                        reason: "target has no argument index".into(),
                    });
                }
                let idx = dst_node.argument_index;
                if self
                    .arguments(src)
                    .iter()
                    .any(|&a| a != dst && self.nodes[&a].argument_index == idx)
                {
                    return Err(CpgError::InvalidEdge {
                        kind: "ARGUMENT",
                        src,
                        dst,
                        reason: format!("argument index {idx} already taken at this call site"),
                    });
                }
            }
            _ => {}
        }
        let key = (src, dst, kind.clone());
        if !self.edge_set.insert(key) {
            return Ok(());
        }
        let ty = kind.edge_type();
        insert_sorted(self.out_adj.entry((src, ty)).or_default(), dst);
        insert_sorted(self.in_adj.entry((dst, ty)).or_default(), src);
        self.edges.push(CpgEdge { src, dst, kind });
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Result<&CpgNode, CpgError> {
        self.nodes.get(&id).ok_or(CpgError::UnknownNode(id))
    }

    pub fn get(&self, id: NodeId) -> Option<&CpgNode> {
        self.nodes.get(&id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &CpgNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[CpgEdge] {
        &self.edges
    }

    /// Successors of `node` over one layer, ascending by id, deduplicated
    /// across edge labels.
    pub fn out_neighbors(&self, node: NodeId, ty: EdgeType) -> Result<&[NodeId], CpgError> {
        if !self.nodes.contains_key(&node) {
            return Err(CpgError::UnknownNode(node));
        }
        Ok(self
            .out_adj
            .get(&(node, ty))
            .map(|v| v.as_slice())
            .unwrap_or(&[]))
    }

    /// Predecessors of `node` over one layer; exact transpose of
    /// [`Cpg::out_neighbors`].
    pub fn in_neighbors(&self, node: NodeId, ty: EdgeType) -> Result<&[NodeId], CpgError> {
        if !self.nodes.contains_key(&node) {
            return Err(CpgError::UnknownNode(node));
        }
        Ok(self
            .in_adj
            .get(&(node, ty))
            .map(|v| v.as_slice())
            .unwrap_or(&[]))
    }

    pub fn method_by_full_name(&self, full_name: &str) -> Option<NodeId> {
        self.method_index.get(full_name).copied()
    }

    /// All Method and ExternalMethodStub ids, ascending.
    pub fn methods(&self) -> impl Iterator<Item = &CpgNode> {
        self.nodes.values().filter(|n| n.kind.is_method_like())
    }

    // Shape helpers used throughout the later stages. They intentionally
    // tolerate malformed shapes (returning None/empty) so queries over
    // ingested graphs degrade instead of panicking.

    /// Argument nodes of a call, sorted by argument index.
    pub fn arguments(&self, call: NodeId) -> Vec<NodeId> {
        let mut args: Vec<NodeId> = self
            .out_adj
            .get(&(call, EdgeType::Argument))
            .cloned()
            .unwrap_or_default();
        args.sort_by_key(|a| (self.nodes[a].argument_index, a.0));
        args
    }

    pub fn argument_at(&self, call: NodeId, index: i32) -> Option<NodeId> {
        self.out_adj
            .get(&(call, EdgeType::Argument))?
            .iter()
            .copied()
            .find(|a| self.nodes[a].argument_index == index)
    }

    /// Highest argument index present at a call site, or -1 when the call
    /// has no arguments.
    pub fn call_arity(&self, call: NodeId) -> i32 {
        self.out_adj
            .get(&(call, EdgeType::Argument))
            .map(|args| {
                args.iter()
                    .map(|a| self.nodes[a].argument_index)
                    .max()
                    .unwrap_or(-1)
            })
            .unwrap_or(-1)
    }

    /// The call this node is an argument of, if any.
    pub fn enclosing_call(&self, node: NodeId) -> Option<NodeId> {
        self.in_adj
            .get(&(node, EdgeType::Argument))
            .and_then(|v| v.first().copied())
    }

    pub fn is_call_argument(&self, node: NodeId) -> bool {
        self.enclosing_call(node).is_some()
    }

    /// The Method or ExternalMethodStub a call resolves to.
    pub fn callee_of(&self, call: NodeId) -> Option<NodeId> {
        self.out_adj
            .get(&(call, EdgeType::Call))
            .and_then(|v| v.first().copied())
    }

    pub fn callee_full_name(&self, call: NodeId) -> Option<&str> {
        self.callee_of(call)
            .map(|m| self.nodes[&m].full_name.as_str())
    }

    /// Call sites with a CALL edge to this method.
    pub fn callers_of(&self, method: NodeId) -> &[NodeId] {
        self.in_adj
            .get(&(method, EdgeType::Call))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// ParameterIn nodes of a method, sorted by positional index.
    pub fn parameters_of(&self, method: NodeId) -> Vec<NodeId> {
        let mut params: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.method_id == method && n.kind == NodeKind::ParameterIn)
            .map(|n| n.id)
            .collect();
        params.sort_by_key(|p| (self.nodes[p].argument_index, p.0));
        params
    }

    pub fn parameter_out_at(&self, method: NodeId, index: i32) -> Option<NodeId> {
        self.nodes
            .values()
            .find(|n| {
                n.method_id == method
                    && n.kind == NodeKind::ParameterOut
                    && n.argument_index == index
            })
            .map(|n| n.id)
    }

    pub fn method_return_of(&self, method: NodeId) -> Option<NodeId> {
        self.nodes
            .values()
            .find(|n| n.method_id == method && n.kind == NodeKind::MethodReturn)
            .map(|n| n.id)
    }

    /// Nodes owned by a method, ascending by id.
    pub fn nodes_of_method(&self, method: NodeId) -> impl Iterator<Item = &CpgNode> {
        self.nodes
            .values()
            .filter(move |n| n.method_id == method && n.id != method)
    }

    /// FullName of the method that owns `node`, for report rows.
    pub fn owning_method_name(&self, node: NodeId) -> &str {
        self.nodes
            .get(&node)
            .and_then(|n| self.nodes.get(&n.method_id))
            .map(|m| m.full_name.as_str())
            .unwrap_or("")
    }
}

fn insert_sorted(list: &mut Vec<NodeId>, value: NodeId) {
    if let Err(pos) = list.binary_search(&value) {
        list.insert(pos, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn method(cpg: &mut Cpg, full_name: &str) -> NodeId {
        cpg.add_node(NodeKind::Method, NodeAttrs::new().name(full_name).full_name(full_name))
            .unwrap()
    }

    #[test]
    fn first_method_insertion_is_retrievable_by_full_name() {
        let mut cpg = Cpg::new();
        let id = method(&mut cpg, "foo");
        assert_eq!(id, NodeId(1));
        assert_eq!(cpg.method_by_full_name("foo"), Some(id));
        assert_eq!(cpg.node(id).unwrap().method_id, id);
    }

    #[test]
    fn node_ids_are_fresh_per_insertion() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let a = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("u.transform(v)").method(m))
            .unwrap();
        let b = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("u.transform(v)").method(m))
            .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn duplicate_method_full_name_is_rejected() {
        let mut cpg = Cpg::new();
        method(&mut cpg, "foo");
        let err = cpg
            .add_node(NodeKind::Method, NodeAttrs::new().full_name("foo"))
            .unwrap_err();
        assert!(matches!(err, CpgError::DuplicateFullName(n) if n == "foo"));
    }

    #[test]
    fn ddg_edge_appears_in_out_adjacency() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let def = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("u = getValue()").method(m))
            .unwrap();
        let usage = cpg
            .add_node(
                NodeKind::Identifier,
                NodeAttrs::new().name("u").code("u").argument_index(0).method(m),
            )
            .unwrap();
        cpg.add_edge(def, usage, EdgeKind::Ddg("u".into())).unwrap();
        assert_eq!(cpg.out_neighbors(def, EdgeType::Ddg).unwrap(), &[usage]);
        assert_eq!(cpg.in_neighbors(usage, EdgeType::Ddg).unwrap(), &[def]);
    }

    #[test]
    fn cfg_self_loop_is_allowed_and_visible_once() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let n = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("spin()").method(m))
            .unwrap();
        cpg.add_edge(n, n, EdgeKind::Cfg).unwrap();
        cpg.add_edge(n, n, EdgeKind::Cfg).unwrap();
        assert_eq!(cpg.out_neighbors(n, EdgeType::Cfg).unwrap(), &[n]);
        let loops = cpg
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Cfg && e.src == n)
            .count();
        assert_eq!(loops, 1);
    }

    #[test]
    fn call_edge_to_identifier_is_rejected() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let call = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("g()").method(m))
            .unwrap();
        let ident = cpg
            .add_node(NodeKind::Identifier, NodeAttrs::new().name("g").method(m))
            .unwrap();
        let err = cpg.add_edge(call, ident, EdgeKind::Call).unwrap_err();
        assert!(matches!(err, CpgError::InvalidEdge { kind: "CALL", .. }));
    }

    #[test]
    fn missing_edge_endpoint_is_rejected() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let err = cpg.add_edge(m, NodeId(99), EdgeKind::Ast).unwrap_err();
        assert!(matches!(err, CpgError::UnknownNode(NodeId(99))));
    }

    #[test]
    fn out_neighbors_of_isolated_node_is_empty() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        assert!(cpg.out_neighbors(m, EdgeType::Ddg).unwrap().is_empty());
        assert!(cpg.out_neighbors(NodeId(42), EdgeType::Ddg).is_err());
    }

    #[test]
    fn duplicate_argument_index_at_one_call_site_is_rejected() {
        let mut cpg = Cpg::new();
        let m = method(&mut cpg, "f");
        let call = cpg
            .add_node(NodeKind::Call, NodeAttrs::new().code("g(a, b)").method(m))
            .unwrap();
        let a = cpg
            .add_node(NodeKind::Identifier, NodeAttrs::new().name("a").argument_index(1).method(m))
            .unwrap();
        let b = cpg
            .add_node(NodeKind::Identifier, NodeAttrs::new().name("b").argument_index(1).method(m))
            .unwrap();
        cpg.add_edge(call, a, EdgeKind::Argument).unwrap();
        let err = cpg.add_edge(call, b, EdgeKind::Argument).unwrap_err();
        assert!(matches!(err, CpgError::InvalidEdge { kind: "ARGUMENT", .. }));
    }
}
