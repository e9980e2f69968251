//! JSON serialization of a [`Cpg`] and the ingestion path for graphs
//! produced by other frontends.
//!
//! The document shape is
//! `{"nodes":[{"id","kind","code","name","fullName","argumentIndex","line","methodId"}],
//!   "edges":[{"src","dst","kind","variable"?}]}`
//! with kind strings matching the node and edge type names exactly and
//! `variable` present exactly on DDG edges. Output order is canonical
//! (nodes ascending by id, edges sorted by source, target, kind, label), so
//! serialization is deterministic and round-trips are the identity.

use super::{Cpg, CpgError, CpgNode, EdgeKind, EdgeType, NodeId, NodeKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct NodeDoc {
    id: u32,
    kind: String,
    code: String,
    name: String,
    full_name: String,
    argument_index: i32,
    line: u32,
    method_id: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: u32,
    dst: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    variable: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CpgDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

pub fn serialize_cpg(cpg: &Cpg) -> String {
    let nodes: Vec<NodeDoc> = cpg
        .nodes()
        .map(|n| NodeDoc {
            id: n.id.0,
            kind: n.kind.name().to_string(),
            code: n.code.clone(),
            name: n.name.clone(),
            full_name: n.full_name.clone(),
            argument_index: n.argument_index,
            line: n.line,
            method_id: n.method_id.0,
        })
        .collect();
    let mut edges: Vec<&super::CpgEdge> = cpg.edges().iter().collect();
    edges.sort_by(|a, b| {
        (a.src, a.dst, a.kind.edge_type(), a.kind.variable())
            .cmp(&(b.src, b.dst, b.kind.edge_type(), b.kind.variable()))
    });
    let edges: Vec<EdgeDoc> = edges
        .into_iter()
        .map(|e| EdgeDoc {
            src: e.src.0,
            dst: e.dst.0,
            kind: e.kind.edge_type().name().to_string(),
            variable: e.kind.variable().map(str::to_string),
        })
        .collect();
    let doc = CpgDoc { nodes, edges };
    serde_json::to_string_pretty(&doc).expect("graph document serialization cannot fail")
}

pub fn load_cpg(text: &str) -> Result<Cpg, CpgError> {
    let doc: CpgDoc =
        serde_json::from_str(text).map_err(|e| CpgError::Ingest(format!("malformed document: {e}")))?;
    let mut cpg = Cpg::new();
    for n in &doc.nodes {
        let kind = NodeKind::from_name(&n.kind)
            .ok_or_else(|| CpgError::Ingest(format!("unknown node kind `{}` on node {}", n.kind, n.id)))?;
        cpg.insert_node_with_id(CpgNode {
            id: NodeId(n.id),
            kind,
            code: n.code.clone(),
            name: n.name.clone(),
            full_name: n.full_name.clone(),
            argument_index: n.argument_index,
            line: n.line,
            method_id: NodeId(n.method_id),
        })?;
    }
    for n in &doc.nodes {
        if cpg.get(NodeId(n.method_id)).is_none() {
            return Err(CpgError::Ingest(format!(
                "node {} references unknown methodId {}",
                n.id, n.method_id
            )));
        }
    }
    for e in &doc.edges {
        let ty = EdgeType::from_name(&e.kind)
            .ok_or_else(|| CpgError::Ingest(format!("unknown edge kind `{}` on edge {} -> {}", e.kind, e.src, e.dst)))?;
        for endpoint in [e.src, e.dst] {
            if cpg.get(NodeId(endpoint)).is_none() {
                return Err(CpgError::Ingest(format!(
                    "dangling edge {} -> {} ({}): unknown node id {}",
                    e.src, e.dst, e.kind, endpoint
                )));
            }
        }
        let kind = match (ty, &e.variable) {
            (EdgeType::Ddg, Some(var)) => EdgeKind::Ddg(var.clone()),
            (EdgeType::Ddg, None) => {
                return Err(CpgError::Ingest(format!(
                    "DDG edge {} -> {} is missing its variable label",
                    e.src, e.dst
                )))
            }
            (_, Some(_)) => {
                return Err(CpgError::Ingest(format!(
                    "{} edge {} -> {} must not carry a variable label",
                    e.kind, e.src, e.dst
                )))
            }
            (EdgeType::Ast, None) => EdgeKind::Ast,
            (EdgeType::Cfg, None) => EdgeKind::Cfg,
            (EdgeType::Cdg, None) => EdgeKind::Cdg,
            (EdgeType::Call, None) => EdgeKind::Call,
            (EdgeType::Argument, None) => EdgeKind::Argument,
            (EdgeType::Ref, None) => EdgeKind::Ref,
        };
        cpg.add_edge(NodeId(e.src), NodeId(e.dst), kind)?;
    }
    Ok(cpg)
}

/// Hex digest of the serialized DDG edge set, in canonical order. Two graphs
/// have equal digests exactly when their labeled data-dependence edges are
/// identical; the digest is what the stability checks compare before and
/// after semantics files are loaded.
pub fn ddg_digest(cpg: &Cpg) -> String {
    let mut rows: Vec<(u32, u32, &str)> = cpg
        .edges()
        .iter()
        .filter_map(|e| e.kind.variable().map(|v| (e.src.0, e.dst.0, v)))
        .collect();
    rows.sort();
    let mut hasher = Sha256::new();
    for (src, dst, var) in rows {
        hasher.update(src.to_le_bytes());
        hasher.update(dst.to_le_bytes());
        hasher.update((var.len() as u64).to_le_bytes());
        hasher.update(var.as_bytes());
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
