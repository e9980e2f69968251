//! A static taint-tracking engine built around an explicit data-dependence
//! representation.
//!
//! The pipeline has three stages. A frontend (either the bundled MiniLang
//! compiler in [`minilang`] or a JSON document ingested by
//! [`cpg::load_cpg`]) produces a code property graph: one graph holding AST,
//! CFG, CDG, DDG, CALL, ARGUMENT, and REF layers. The data-dependence layer
//! ([`ddg`]) is built once per program and never changes afterwards: every
//! call is assumed to let any input reach any output. Queries
//! ([`engine`]) then walk the graph backwards from sinks to sources,
//! filtering steps against per-method flow semantics ([`semantics`]) at
//! query time, so refining the semantics never requires rebuilding the
//! graph.
//!
//! Sources and sinks are picked out of a graph with the small matcher
//! language in [`matcher`], and [`bench`] runs labeled corpora of test
//! programs and scores the results.

pub mod bench;
pub mod cdg;
pub mod cpg;
pub mod ddg;
pub mod engine;
pub mod matcher;
pub mod minilang;
pub mod ops;
pub mod semantics;
