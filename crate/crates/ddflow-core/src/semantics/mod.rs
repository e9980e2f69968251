//! Callee behavior summaries: which argument positions of a call taint
//! which others, and whether the return value is tainted.
//!
//! A summary is keyed by the callee's fullName and holds flow mappings
//! `src -> dst` over argument positions (0 is the receiver, -1 the return
//! value). An entry with no mappings declares the callee a full
//! sanitizer: nothing flows through it. Calls whose callee has no entry
//! at all are treated pessimistically, as if every input reached every
//! output.
//!
//! Summaries are consulted at query time only; the graph itself is built
//! without them and never changes when they do.

pub mod parser;
pub mod validity;

pub use parser::{parse_semantics, SemDiagnostic};

use crate::ops;
use regex::Regex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArgPos {
    Index(i32),
    /// A named position, kept from the rule file for compatibility.
    /// Positional queries never match it.
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mapping {
    pub src: ArgPos,
    pub dst: ArgPos,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MethodSemantics {
    pub full_name: String,
    pub mappings: Vec<Mapping>,
    pub passthrough: bool,
    pub taint_all: bool,
}

impl MethodSemantics {
    pub fn new(full_name: impl Into<String>) -> Self {
        MethodSemantics { full_name: full_name.into(), ..Default::default() }
    }

    pub fn mapping(mut self, src: i32, dst: i32) -> Self {
        self.mappings.push(Mapping { src: ArgPos::Index(src), dst: ArgPos::Index(dst) });
        self
    }
}

/// A summary bound to a concrete call site. Shorthand entries like
/// PASSTHROUGH cover positions up to the site's arity, so the same entry
/// expands differently at different calls.
#[derive(Clone, Copy)]
pub struct SemView<'a> {
    pub sem: &'a MethodSemantics,
    pub arity: i32,
}

impl SemView<'_> {
    pub fn defines_return(&self) -> bool {
        self.sem.taint_all
            || (self.sem.passthrough && self.arity >= 1)
            || self.sem.mappings.iter().any(|m| m.dst == ArgPos::Index(-1))
    }

    pub fn defines_index(&self, j: i32) -> bool {
        let in_range = (0..=self.arity).contains(&j);
        (self.sem.taint_all && in_range)
            || (self.sem.passthrough && in_range)
            || self.sem.mappings.iter().any(|m| m.dst == ArgPos::Index(j))
    }

    pub fn uses_index(&self, i: i32) -> bool {
        let in_range = (0..=self.arity).contains(&i);
        (self.sem.taint_all && in_range)
            || (self.sem.passthrough && in_range)
            || self.sem.mappings.iter().any(|m| m.src == ArgPos::Index(i))
    }

    pub fn pair(&self, i: i32, j: i32) -> bool {
        if self.sem.taint_all
            && (0..=self.arity).contains(&i)
            && (j == -1 || (0..=self.arity).contains(&j))
        {
            return true;
        }
        if self.sem.passthrough {
            if i == j && (0..=self.arity).contains(&i) {
                return true;
            }
            if i == 1 && j == -1 && self.arity >= 1 {
                return true;
            }
        }
        self.sem
            .mappings
            .iter()
            .any(|m| m.src == ArgPos::Index(i) && m.dst == ArgPos::Index(j))
    }
}

/// Built-in summaries for the operator callees produced by lowering.
/// Assignments taint their target and value from the source; binary
/// operators and accesses taint their result from their operands.
/// Allocation gets no entry on purpose: a fresh object carries nothing.
pub fn default_operator_semantics() -> Vec<MethodSemantics> {
    vec![
        MethodSemantics::new(ops::OP_ASSIGNMENT).mapping(2, 1).mapping(2, -1),
        MethodSemantics::new(ops::OP_BINARY)
            .mapping(1, -1)
            .mapping(2, -1)
            .mapping(1, 1)
            .mapping(2, 2),
        MethodSemantics::new(ops::OP_INDEX_ACCESS)
            .mapping(1, -1)
            .mapping(1, 1)
            .mapping(2, 2),
        MethodSemantics::new(ops::OP_FIELD_ACCESS)
            .mapping(1, -1)
            .mapping(1, 1)
            .mapping(2, 2),
    ]
}

/// Ordered collection of summaries. Later entries shadow earlier ones
/// with the same coverage, so user rules loaded after the defaults win.
#[derive(Default)]
pub struct SemanticsRegistry {
    entries: Vec<MethodSemantics>,
    regex_names: bool,
    compiled: Vec<Option<Regex>>,
}

impl SemanticsRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        reg.extend(default_operator_semantics());
        reg
    }

    pub fn add(&mut self, sem: MethodSemantics) {
        if self.regex_names {
            self.compiled.push(compile_name(&sem.full_name));
        } else {
            self.compiled.push(None);
        }
        self.entries.push(sem);
    }

    pub fn extend(&mut self, sems: impl IntoIterator<Item = MethodSemantics>) {
        for sem in sems {
            self.add(sem);
        }
    }

    pub fn load(&mut self, source: &str) -> Result<(), Vec<SemDiagnostic>> {
        self.extend(parse_semantics(source)?);
        Ok(())
    }

    /// Treat entry names as anchored regular expressions.
    pub fn set_regex_names(&mut self, on: bool) {
        self.regex_names = on;
        self.compiled = if on {
            self.entries.iter().map(|e| compile_name(&e.full_name)).collect()
        } else {
            vec![None; self.entries.len()]
        };
    }

    pub fn entries(&self) -> &[MethodSemantics] {
        &self.entries
    }

    /// The entry governing `full_name`, if any. Exact matches win over
    /// base-name matches (the part before a `:` signature suffix), and
    /// within each tier the most recently added entry wins.
    pub fn lookup(&self, full_name: &str) -> Option<&MethodSemantics> {
        if self.regex_names {
            return self
                .entries
                .iter()
                .enumerate()
                .rev()
                .find(|(i, e)| match &self.compiled[*i] {
                    Some(re) => re.is_match(full_name),
                    None => e.full_name == full_name,
                })
                .map(|(_, e)| e);
        }
        if let Some(e) = self.entries.iter().rev().find(|e| e.full_name == full_name) {
            return Some(e);
        }
        let base = base_name(full_name);
        let query_has_sig = full_name.contains(':');
        self.entries.iter().rev().find(|e| {
            base_name(&e.full_name) == base
                && (!e.full_name.contains(':') || !query_has_sig)
        })
    }
}

fn base_name(s: &str) -> &str {
    s.split(':').next().unwrap_or(s)
}

fn compile_name(pattern: &str) -> Option<Regex> {
    Regex::new(&format!("^(?:{pattern})$")).ok()
}
