//! Recursive-descent parser for MiniLang.
//!
//! `a.b(c)` is syntactically ambiguous between a call on a receiver value
//! and a call to the namespaced method `a.b`. The parser first builds the
//! receiver form, then a per-function rewrite folds chains whose root
//! identifier is not a local name (neither a parameter nor assigned
//! anywhere in the function) into a dotted callee, so `Sink.addValue(x)`
//! calls the external method while `u.transform(v)` passes `u` as the
//! receiver argument.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{ParseDiagnostic, Severity};
use std::collections::BTreeSet;

type PResult<T> = Result<T, ParseDiagnostic>;

pub fn parse(source: &str) -> Result<Program, Vec<ParseDiagnostic>> {
    let tokens = lex(source).map_err(|d| vec![d])?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut program = parser.parse_program().map_err(|d| vec![d])?;
    for function in &mut program.functions {
        fold_namespaced_calls(function);
    }
    let diagnostics = check_unique_names(&program);
    if diagnostics.is_empty() {
        Ok(program)
    } else {
        Err(diagnostics)
    }
}

/// Concatenates compilation units, re-checking name uniqueness across the
/// whole set.
pub fn merge(programs: Vec<Program>) -> Result<Program, Vec<ParseDiagnostic>> {
    let mut merged = Program::default();
    for p in programs {
        merged.externs.extend(p.externs);
        merged.functions.extend(p.functions);
    }
    let diagnostics = check_unique_names(&merged);
    if diagnostics.is_empty() {
        Ok(merged)
    } else {
        Err(diagnostics)
    }
}

fn check_unique_names(program: &Program) -> Vec<ParseDiagnostic> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut diagnostics = Vec::new();
    let names = program
        .externs
        .iter()
        .map(|e| (e.full_name.as_str(), e.line))
        .chain(program.functions.iter().map(|f| (f.name.as_str(), f.line)));
    for (name, line) in names {
        if !seen.insert(name) {
            diagnostics.push(ParseDiagnostic {
                line,
                column: 1,
                message: format!("duplicate definition of `{name}`"),
                severity: Severity::Error,
            });
        }
    }
    diagnostics
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn line(&self) -> u32 {
        self.tokens[self.pos].line
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseDiagnostic {
        let (line, column) = self.here();
        ParseDiagnostic {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, u32)> {
        let line = self.line();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok((name, line))
            }
            other => Err(self.error(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn parse_program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(program),
                Tok::KwExtern => program.externs.push(self.parse_extern()?),
                Tok::KwFn => program.functions.push(self.parse_function()?),
                other => {
                    return Err(self.error(format!(
                        "expected `extern` or `fn` at top level, found {}",
                        other.describe()
                    )))
                }
            }
        }
    }

    fn parse_extern(&mut self) -> PResult<ExternDecl> {
        let line = self.line();
        self.expect(Tok::KwExtern)?;
        let full_name = self.parse_dotted_name()?;
        self.expect(Tok::LParen)?;
        let params = self.parse_param_list()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        Ok(ExternDecl { full_name, params, line })
    }

    fn parse_dotted_name(&mut self) -> PResult<String> {
        let (mut name, _) = self.expect_ident("a name")?;
        while *self.peek() == Tok::Dot {
            self.advance();
            let (segment, _) = self.expect_ident("a name segment")?;
            name.push('.');
            name.push_str(&segment);
        }
        Ok(name)
    }

    fn parse_param_list(&mut self) -> PResult<Vec<String>> {
        let mut params = Vec::new();
        if *self.peek() == Tok::RParen {
            return Ok(params);
        }
        loop {
            let (name, line) = self.expect_ident("a parameter name")?;
            if params.contains(&name) {
                return Err(ParseDiagnostic {
                    line,
                    column: 1,
                    message: format!("duplicate parameter `{name}`"),
                    severity: Severity::Error,
                });
            }
            params.push(name);
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                return Ok(params);
            }
        }
    }

    fn parse_function(&mut self) -> PResult<Function> {
        let line = self.line();
        self.expect(Tok::KwFn)?;
        let (name, _) = self.expect_ident("a function name")?;
        self.expect(Tok::LParen)?;
        let params = self.parse_param_list()?;
        self.expect(Tok::RParen)?;
        let body = self.parse_block()?;
        Ok(Function { name, params, body, line })
    }

    fn parse_block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unterminated block, expected `}`"));
            }
            stmts.push(self.parse_stmt()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        match self.peek() {
            Tok::KwIf => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                let then_body = self.parse_block()?;
                let else_body = if *self.peek() == Tok::KwElse {
                    self.advance();
                    self.parse_block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_body, else_body, line })
            }
            Tok::KwWhile => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                let body = self.parse_block()?;
                Ok(Stmt::While { cond, body, line })
            }
            Tok::KwReturn => {
                self.advance();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return { value, line })
            }
            _ => {
                let expr = self.parse_expr()?;
                if *self.peek() == Tok::Assign {
                    if !matches!(expr, Expr::Ident { .. } | Expr::Index { .. } | Expr::Field { .. }) {
                        return Err(self.error(
                            "invalid assignment target; expected a name, index access, or field access",
                        ));
                    }
                    self.advance();
                    let value = self.parse_expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Assign { target: expr, value, line })
                } else {
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Expr { expr, line })
                }
            }
        }
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        self.parse_binary(0)
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.parse_postfix()?;
        while let Some((op, prec)) = binop_of(self.peek()) {
            if prec < min_prec {
                break;
            }
            let line = self.line();
            self.advance();
            let rhs = self.parse_binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line,
            };
        }
        Ok(lhs)
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.parse_primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    let line = self.line();
                    self.advance();
                    let (name, _) = self.expect_ident("a member name")?;
                    if *self.peek() == Tok::LParen {
                        self.advance();
                        let args = self.parse_arg_list()?;
                        expr = Expr::MethodCall {
                            receiver: Box::new(expr),
                            method: name,
                            args,
                            line,
                        };
                    } else {
                        expr = Expr::Field {
                            base: Box::new(expr),
                            field: name,
                            line,
                        };
                    }
                }
                Tok::LBracket => {
                    let line = self.line();
                    self.advance();
                    let index = self.parse_expr()?;
                    self.expect(Tok::RBracket)?;
                    expr = Expr::Index {
                        base: Box::new(expr),
                        index: Box::new(index),
                        line,
                    };
                }
                _ => return Ok(expr),
            }
        }
    }

    fn parse_arg_list(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.advance();
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RParen => {
                    self.advance();
                    return Ok(args);
                }
                other => {
                    let other = other.describe();
                    return Err(self.error(format!("expected `,` or `)` in argument list, found {other}")));
                }
            }
        }
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let line = self.line();
        match self.peek().clone() {
            Tok::Int(value) => {
                self.advance();
                Ok(Expr::Literal { value, line })
            }
            Tok::KwNew => {
                self.advance();
                self.expect(Tok::LParen)?;
                self.expect(Tok::RParen)?;
                Ok(Expr::New { line })
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let args = self.parse_arg_list()?;
                    Ok(Expr::Call { callee: name, args, line })
                } else {
                    Ok(Expr::Ident { name, line })
                }
            }
            other => Err(self.error(format!("expected an expression, found {}", other.describe()))),
        }
    }
}

fn binop_of(tok: &Tok) -> Option<(BinOp, u8)> {
    Some(match tok {
        Tok::OrOr => (BinOp::Or, 1),
        Tok::AndAnd => (BinOp::And, 2),
        Tok::EqEq => (BinOp::Eq, 3),
        Tok::Ne => (BinOp::Ne, 3),
        Tok::Lt => (BinOp::Lt, 4),
        Tok::Le => (BinOp::Le, 4),
        Tok::Gt => (BinOp::Gt, 4),
        Tok::Ge => (BinOp::Ge, 4),
        Tok::Plus => (BinOp::Add, 5),
        Tok::Minus => (BinOp::Sub, 5),
        Tok::Star => (BinOp::Mul, 6),
        Tok::Slash => (BinOp::Div, 6),
        Tok::Percent => (BinOp::Mod, 6),
    _ => return None,
    })
}

fn fold_namespaced_calls(function: &mut Function) {
    let mut locals: BTreeSet<String> = function.params.iter().cloned().collect();
    collect_assigned_names(&function.body, &mut locals);
    for stmt in &mut function.body {
        fold_stmt(stmt, &locals);
    }
}

fn collect_assigned_names(body: &[Stmt], locals: &mut BTreeSet<String>) {
    for stmt in body {
        match stmt {
            Stmt::Assign { target: Expr::Ident { name, .. }, .. } => {
                locals.insert(name.clone());
            }
            Stmt::If { then_body, else_body, .. } => {
                collect_assigned_names(then_body, locals);
                collect_assigned_names(else_body, locals);
            }
            Stmt::While { body, .. } => collect_assigned_names(body, locals),
            _ => {}
        }
    }
}

fn fold_stmt(stmt: &mut Stmt, locals: &BTreeSet<String>) {
    match stmt {
        Stmt::Assign { target, value, .. } => {
            fold_expr(target, locals);
            fold_expr(value, locals);
        }
        Stmt::Expr { expr, .. } => fold_expr(expr, locals),
        Stmt::If { cond, then_body, else_body, .. } => {
            fold_expr(cond, locals);
            for s in then_body {
                fold_stmt(s, locals);
            }
            for s in else_body {
                fold_stmt(s, locals);
            }
        }
        Stmt::While { cond, body, .. } => {
            fold_expr(cond, locals);
            for s in body {
                fold_stmt(s, locals);
            }
        }
        Stmt::Return { value, .. } => {
            if let Some(v) = value {
                fold_expr(v, locals);
            }
        }
    }
}

fn fold_expr(expr: &mut Expr, locals: &BTreeSet<String>) {
    match expr {
        Expr::MethodCall { receiver, args, method, line } => {
            fold_expr(receiver, locals);
            for a in args.iter_mut() {
                fold_expr(a, locals);
            }
            if let Some(path) = namespace_path(receiver, locals) {
                let callee = format!("{}.{}", path, method);
                *expr = Expr::Call {
                    callee,
                    args: std::mem::take(args),
                    line: *line,
                };
            }
        }
        Expr::Call { args, .. } => {
            for a in args.iter_mut() {
                fold_expr(a, locals);
            }
        }
        Expr::Binary { lhs, rhs, .. } => {
            fold_expr(lhs, locals);
            fold_expr(rhs, locals);
        }
        Expr::Index { base, index, .. } => {
            fold_expr(base, locals);
            fold_expr(index, locals);
        }
        Expr::Field { base, .. } => fold_expr(base, locals),
        Expr::Ident { .. } | Expr::Literal { .. } | Expr::New { .. } => {}
    }
}

/// Dotted text of a pure identifier/field chain whose root is not a local
/// name, e.g. `Sink` or `java.lang.System`; None when the expression is a
/// value.
fn namespace_path(expr: &Expr, locals: &BTreeSet<String>) -> Option<String> {
    match expr {
        Expr::Ident { name, .. } if !locals.contains(name) => Some(name.clone()),
        Expr::Field { base, field, .. } => {
            namespace_path(base, locals).map(|p| format!("{p}.{field}"))
        }
        _ => None,
    }
}
