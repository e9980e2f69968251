//! MiniLang: a small dynamically-typed imperative language that exercises
//! every graph shape the engine consumes: assignments, branches, loops,
//! namespaced external calls, receiver calls, and container writes.
//!
//! Grammar sketch (`//` comments are allowed anywhere):
//!
//! ```text
//! program := (extern | fn)*
//! extern  := "extern" dottedName "(" params? ")" ";"
//! fn      := "fn" name "(" params? ")" block
//! stmt    := target "=" expr ";" | expr ";" | "return" expr? ";"
//!          | "if" "(" expr ")" block ("else" block)?
//!          | "while" "(" expr ")" block
//! expr    := call | expr binop expr | name | int | "new" "(" ")"
//!          | expr "[" expr "]" | expr "." name
//! call    := dottedName "(" args? ")" | expr "." name "(" args? ")"
//! ```
//!
//! Assignment targets are names, index accesses, or field accesses. There
//! is no type checker: `extern` declarations only introduce external method
//! names, and any call to an unknown name resolves to a stub.

pub mod ast;
pub mod lexer;
mod lower;
pub mod parser;
pub mod printer;

pub use lower::build_cpg;
pub use parser::{merge, parse};
pub use printer::print_program;

use crate::cdg::build_cdg;
use crate::cpg::{Cpg, CpgError, NodeKind};
use crate::ddg::build_ddg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub severity: Severity,
}

impl std::fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Everything between source text and a query-ready graph: AST and CFG
/// construction with operator lowering, then control and data dependence
/// per method.
pub fn compile(program: &ast::Program) -> Result<Cpg, CpgError> {
    let mut cpg = build_cpg(program)?;
    let methods: Vec<_> = cpg
        .methods()
        .filter(|m| m.kind == NodeKind::Method)
        .map(|m| m.id)
        .collect();
    for method in methods {
        build_cdg(&mut cpg, method)?;
        build_ddg(&mut cpg, method)?;
    }
    Ok(cpg)
}

#[derive(Debug)]
pub enum CompileError {
    Parse(Vec<ParseDiagnostic>),
    Graph(CpgError),
}

impl std::fmt::Display for CompileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompileError::Parse(diags) => {
                for (i, d) in diags.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
            CompileError::Graph(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CompileError {}

/// Parses and fully compiles one source text.
pub fn compile_source(source: &str) -> Result<Cpg, CompileError> {
    let program = parse(source).map_err(CompileError::Parse)?;
    compile(&program).map_err(CompileError::Graph)
}
