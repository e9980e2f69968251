//! Pretty-printer for MiniLang syntax trees. Printing then re-parsing
//! yields a structurally equal tree; the printer is also what gives CPG
//! nodes their display text.

use super::ast::*;

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for e in &program.externs {
        out.push_str(&format!("extern {}({});\n", e.full_name, e.params.join(", ")));
    }
    for f in &program.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("fn {}({}) {{\n", f.name, f.params.join(", ")));
        for stmt in &f.body {
            print_stmt(stmt, 1, &mut out);
        }
        out.push_str("}\n");
    }
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    match stmt {
        Stmt::Assign { target, value, .. } => {
            out.push_str(&format!("{} = {};\n", print_expr(target), print_expr(value)));
        }
        Stmt::Expr { expr, .. } => {
            out.push_str(&format!("{};\n", print_expr(expr)));
        }
        Stmt::If { cond, then_body, else_body, .. } => {
            out.push_str(&format!("if ({}) {{\n", print_expr(cond)));
            for s in then_body {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            if else_body.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in else_body {
                    print_stmt(s, depth + 1, out);
                }
                indent(depth, out);
                out.push_str("}\n");
            }
        }
        Stmt::While { cond, body, .. } => {
            out.push_str(&format!("while ({}) {{\n", print_expr(cond)));
            for s in body {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::Return { value, .. } => match value {
            Some(v) => out.push_str(&format!("return {};\n", print_expr(v))),
            None => out.push_str("return;\n"),
        },
    }
}

/// Renders one expression on a single line. Binary operands are printed by
/// precedence, so the output re-parses into the same tree shape without
/// needing parentheses the grammar does not have.
pub fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Ident { name, .. } => name.clone(),
        Expr::Literal { value, .. } => value.to_string(),
        Expr::Call { callee, args, .. } => format!("{}({})", callee, print_args(args)),
        Expr::MethodCall { receiver, method, args, .. } => {
            format!("{}.{}({})", print_expr(receiver), method, print_args(args))
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            format!("{} {} {}", print_expr(lhs), op.symbol(), print_expr(rhs))
        }
        Expr::New { .. } => "new()".to_string(),
        Expr::Index { base, index, .. } => {
            format!("{}[{}]", print_expr(base), print_expr(index))
        }
        Expr::Field { base, field, .. } => format!("{}.{}", print_expr(base), field),
    }
}

fn print_args(args: &[Expr]) -> String {
    args.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}
