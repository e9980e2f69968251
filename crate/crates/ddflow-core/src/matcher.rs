//! Source and sink selectors.
//!
//! A selector names graph nodes by shape:
//!
//! - `call:NAME` value of every call resolving to NAME
//! - `arg:NAME:I` argument I at such call sites (0 is the receiver)
//! - `param:FN:I` parameter I of method FN
//! - `ret:FN` return node of method FN
//!
//! NAME and FN are matched against fullNames and may contain `*`
//! wildcards. Because argument selectors split on the last `:`, names
//! with signature suffixes like `Obj.f:Obj(Obj)` still work.

use crate::cpg::{Cpg, NodeId, NodeKind};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct MatcherError(String);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Matcher {
    Call { name: String },
    Arg { name: String, index: i32 },
    Param { method: String, index: i32 },
    Ret { method: String },
}

pub fn parse_matcher(s: &str) -> Result<Matcher, MatcherError> {
    let (sort, rest) = s
        .split_once(':')
        .ok_or_else(|| MatcherError(format!("selector `{s}` has no `:`")))?;
    if rest.is_empty() {
        return Err(MatcherError(format!("selector `{s}` names nothing")));
    }
    match sort {
        "call" => Ok(Matcher::Call { name: rest.to_string() }),
        "ret" => Ok(Matcher::Ret { method: rest.to_string() }),
        "arg" | "param" => {
            let (name, idx) = rest.rsplit_once(':').ok_or_else(|| {
                MatcherError(format!("selector `{s}` is missing an argument index"))
            })?;
            if name.is_empty() {
                return Err(MatcherError(format!("selector `{s}` names nothing")));
            }
            let index: i32 = idx.parse().map_err(|_| {
                MatcherError(format!("`{idx}` is not an argument index in `{s}`"))
            })?;
            if sort == "arg" {
                Ok(Matcher::Arg { name: name.to_string(), index })
            } else {
                Ok(Matcher::Param { method: name.to_string(), index })
            }
        }
        other => Err(MatcherError(format!(
            "unknown selector sort `{other}` (expected call, arg, param, or ret)"
        ))),
    }
}

/// Nodes selected by the matcher, ascending by id. With `skip_operators`
/// set, call sites whose callee is an operator are ignored unless the
/// pattern itself starts with `<`.
pub fn resolve(cpg: &Cpg, matcher: &Matcher, skip_operators: bool) -> Vec<NodeId> {
    let keep_call = |pattern: &str, callee: &str| {
        if skip_operators && !pattern.starts_with('<') && crate::ops::is_operator(callee) {
            return false;
        }
        glob_match(pattern, callee)
    };
    let mut out: Vec<NodeId> = match matcher {
        Matcher::Call { name } => cpg
            .nodes()
            .filter(|n| n.kind == NodeKind::Call)
            .filter(|n| cpg.callee_full_name(n.id).is_some_and(|c| keep_call(name, c)))
            .map(|n| n.id)
            .collect(),
        Matcher::Arg { name, index } => cpg
            .nodes()
            .filter(|n| n.kind == NodeKind::Call)
            .filter(|n| cpg.callee_full_name(n.id).is_some_and(|c| keep_call(name, c)))
            .filter_map(|n| cpg.argument_at(n.id, *index))
            .collect(),
        Matcher::Param { method, index } => cpg
            .methods()
            .filter(|m| glob_match(method, &m.full_name))
            .filter_map(|m| {
                cpg.parameters_of(m.id)
                    .into_iter()
                    .find(|&p| cpg.get(p).map(|n| n.argument_index) == Some(*index))
            })
            .collect(),
        Matcher::Ret { method } => cpg
            .methods()
            .filter(|m| glob_match(method, &m.full_name))
            .filter_map(|m| cpg.method_return_of(m.id))
            .collect(),
    };
    out.sort();
    out.dedup();
    out
}

/// Literal match with `*` standing for any run of characters.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    if !pattern.contains('*') {
        return pattern == text;
    }
    let parts: Vec<&str> = pattern.split('*').collect();
    let (first, rest) = parts.split_first().unwrap();
    let (last, middle) = rest.split_last().unwrap();
    if !text.starts_with(first) {
        return false;
    }
    let mut pos = first.len();
    for part in middle {
        if part.is_empty() {
            continue;
        }
        match text[pos..].find(part) {
            Some(i) => pos += i + part.len(),
            None => return false,
        }
    }
    text[pos..].ends_with(last)
}
