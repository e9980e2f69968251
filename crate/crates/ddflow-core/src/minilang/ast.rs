//! Syntax tree for MiniLang programs.

/// A parsed compilation unit: extern declarations plus function definitions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub externs: Vec<ExternDecl>,
    pub functions: Vec<Function>,
}

/// `extern Obj.method(a, b);` names an external method, optionally with a
/// dotted receiver prefix. The parameter names are declarative only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternDecl {
    pub full_name: String,
    pub params: Vec<String>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `target = value;` where the target is an identifier, an index access,
    /// or a field access.
    Assign { target: Expr, value: Expr, line: u32 },
    Expr { expr: Expr, line: u32 },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        line: u32,
    },
    While { cond: Expr, body: Vec<Stmt>, line: u32 },
    Return { value: Option<Expr>, line: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident { name: String, line: u32 },
    Literal { value: i64, line: u32 },
    /// `f(a, b)` or `Obj.method(a, b)` with a namespace-style callee.
    Call { callee: String, args: Vec<Expr>, line: u32 },
    /// `recv.method(a, b)` where the receiver is a value.
    MethodCall {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
        line: u32,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        line: u32,
    },
    New { line: u32 },
    Index { base: Box<Expr>, index: Box<Expr>, line: u32 },
    Field { base: Box<Expr>, field: String, line: u32 },
}

impl Expr {
    pub fn line(&self) -> u32 {
        match self {
            Expr::Ident { line, .. }
            | Expr::Literal { line, .. }
            | Expr::Call { line, .. }
            | Expr::MethodCall { line, .. }
            | Expr::Binary { line, .. }
            | Expr::New { line }
            | Expr::Index { line, .. }
            | Expr::Field { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }
}

/// Structural copy with all line numbers zeroed, for comparisons that should
/// ignore layout (pretty-print round trips re-derive lines from the printed
/// text).
pub fn strip_lines(program: &Program) -> Program {
    Program {
        externs: program
            .externs
            .iter()
            .map(|e| ExternDecl { line: 0, ..e.clone() })
            .collect(),
        functions: program
            .functions
            .iter()
            .map(|f| Function {
                name: f.name.clone(),
                params: f.params.clone(),
                body: f.body.iter().map(strip_stmt).collect(),
                line: 0,
            })
            .collect(),
    }
}

fn strip_stmt(stmt: &Stmt) -> Stmt {
    match stmt {
        Stmt::Assign { target, value, .. } => Stmt::Assign {
            target: strip_expr(target),
            value: strip_expr(value),
            line: 0,
        },
        Stmt::Expr { expr, .. } => Stmt::Expr { expr: strip_expr(expr), line: 0 },
        Stmt::If { cond, then_body, else_body, .. } => Stmt::If {
            cond: strip_expr(cond),
            then_body: then_body.iter().map(strip_stmt).collect(),
            else_body: else_body.iter().map(strip_stmt).collect(),
            line: 0,
        },
        Stmt::While { cond, body, .. } => Stmt::While {
            cond: strip_expr(cond),
            body: body.iter().map(strip_stmt).collect(),
            line: 0,
        },
        Stmt::Return { value, .. } => Stmt::Return {
            value: value.as_ref().map(strip_expr),
            line: 0,
        },
    }
}

fn strip_expr(expr: &Expr) -> Expr {
    match expr {
        Expr::Ident { name, .. } => Expr::Ident { name: name.clone(), line: 0 },
        Expr::Literal { value, .. } => Expr::Literal { value: *value, line: 0 },
        Expr::Call { callee, args, .. } => Expr::Call {
            callee: callee.clone(),
            args: args.iter().map(strip_expr).collect(),
            line: 0,
        },
        Expr::MethodCall { receiver, method, args, .. } => Expr::MethodCall {
            receiver: Box::new(strip_expr(receiver)),
            method: method.clone(),
            args: args.iter().map(strip_expr).collect(),
            line: 0,
        },
        Expr::Binary { op, lhs, rhs, .. } => Expr::Binary {
            op: *op,
            lhs: Box::new(strip_expr(lhs)),
            rhs: Box::new(strip_expr(rhs)),
            line: 0,
        },
        Expr::New { .. } => Expr::New { line: 0 },
        Expr::Index { base, index, .. } => Expr::Index {
            base: Box::new(strip_expr(base)),
            index: Box::new(strip_expr(index)),
            line: 0,
        },
        Expr::Field { base, field, .. } => Expr::Field {
            base: Box::new(strip_expr(base)),
            field: field.clone(),
            line: 0,
        },
    }
}
