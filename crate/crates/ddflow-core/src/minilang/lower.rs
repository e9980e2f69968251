//! Lowers a MiniLang syntax tree into CPG layers: AST, statement-level CFG,
//! CALL, and ARGUMENT.
//!
//! Operator lowering happens inline: assignments, binary operators, index
//! and field accesses, and `new()` become Call nodes with reserved callee
//! names (assignment target at argument 1, source at 2), so the data-flow
//! stages see nothing but calls. Every Call node gets exactly one CALL
//! edge; callees that resolve to no defined function become
//! ExternalMethodStub nodes, declared or not.
//!
//! The CFG is built over statement tops: each statement contributes one
//! node carrying its whole expression tree, conditions are separate nodes
//! feeding a ControlStructure with one successor per branch, and `return`
//! statements route to the method's MethodReturn node.

use super::ast::*;
use super::printer::print_expr;
use crate::cpg::{Cpg, CpgError, EdgeKind, NodeAttrs, NodeId, NodeKind};
use crate::ops;
use std::collections::BTreeMap;

pub fn build_cpg(program: &Program) -> Result<Cpg, CpgError> {
    let mut lowerer = Lowerer {
        cpg: Cpg::new(),
        stubs: BTreeMap::new(),
        methods: BTreeMap::new(),
        method_returns: BTreeMap::new(),
        extern_by_method_name: BTreeMap::new(),
    };
    for e in &program.externs {
        lowerer.declare_extern(e)?;
    }
    for f in &program.functions {
        lowerer.declare_function(f)?;
    }
    for f in &program.functions {
        lowerer.lower_function(f)?;
    }
    Ok(lowerer.cpg)
}

struct Lowerer {
    cpg: Cpg,
    stubs: BTreeMap<String, NodeId>,
    methods: BTreeMap<String, NodeId>,
    method_returns: BTreeMap<NodeId, NodeId>,
    extern_by_method_name: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Copy)]
struct MethodCtx {
    method: NodeId,
    method_return: NodeId,
}

/// Dangling control flow of a lowered region: its first node (None for an
/// empty region, which passes flow straight through) and the nodes whose
/// successor is still open.
struct Flow {
    entry: Option<NodeId>,
    exits: Vec<NodeId>,
}

impl Lowerer {
    fn declare_extern(&mut self, e: &ExternDecl) -> Result<(), CpgError> {
        let simple = e.full_name.rsplit('.').next().unwrap_or(&e.full_name);
        let stub = self.cpg.add_node(
            NodeKind::ExternalMethodStub,
            NodeAttrs::new()
                .name(simple)
                .full_name(&e.full_name)
                .code(&e.full_name)
                .line(e.line),
        )?;
        self.stubs.insert(e.full_name.clone(), stub);
        self.extern_by_method_name
            .entry(simple.to_string())
            .or_default()
            .push(e.full_name.clone());
        let mut param_slots: Vec<(i32, &str)> = Vec::new();
        if e.full_name.contains('.') {
            param_slots.push((0, "this"));
        }
        for (i, p) in e.params.iter().enumerate() {
            param_slots.push((i as i32 + 1, p));
        }
        for (idx, name) in param_slots {
            for kind in [NodeKind::ParameterIn, NodeKind::ParameterOut] {
                let node = self.cpg.add_node(
                    kind,
                    NodeAttrs::new()
                        .name(name)
                        .code(name)
                        .argument_index(idx)
                        .line(e.line)
                        .method(stub),
                )?;
                self.cpg.add_edge(stub, node, EdgeKind::Ast)?;
            }
        }
        Ok(())
    }

    fn declare_function(&mut self, f: &Function) -> Result<(), CpgError> {
        let header = format!("fn {}({})", f.name, f.params.join(", "));
        let method = self.cpg.add_node(
            NodeKind::Method,
            NodeAttrs::new()
                .name(&f.name)
                .full_name(&f.name)
                .code(header)
                .line(f.line),
        )?;
        self.methods.insert(f.name.clone(), method);
        for (i, p) in f.params.iter().enumerate() {
            for kind in [NodeKind::ParameterIn, NodeKind::ParameterOut] {
                let node = self.cpg.add_node(
                    kind,
                    NodeAttrs::new()
                        .name(p)
                        .code(p)
                        .argument_index(i as i32 + 1)
                        .line(f.line)
                        .method(method),
                )?;
                self.cpg.add_edge(method, node, EdgeKind::Ast)?;
            }
        }
        let mr = self.cpg.add_node(
            NodeKind::MethodReturn,
            NodeAttrs::new().code("RET").line(f.line).method(method),
        )?;
        self.cpg.add_edge(method, mr, EdgeKind::Ast)?;
        self.method_returns.insert(method, mr);
        Ok(())
    }

    fn lower_function(&mut self, f: &Function) -> Result<(), CpgError> {
        let method = self.methods[&f.name];
        let ctx = MethodCtx {
            method,
            method_return: self.method_returns[&method],
        };
        let block = self.cpg.add_node(
            NodeKind::Block,
            NodeAttrs::new().line(f.line).method(method),
        )?;
        self.cpg.add_edge(method, block, EdgeKind::Ast)?;
        let flow = self.lower_block(&f.body, block, ctx)?;
        match flow.entry {
            Some(entry) => self.cpg.add_edge(method, entry, EdgeKind::Cfg)?,
            None => self.cpg.add_edge(method, ctx.method_return, EdgeKind::Cfg)?,
        }
        for exit in flow.exits {
            self.cpg.add_edge(exit, ctx.method_return, EdgeKind::Cfg)?;
        }
        Ok(())
    }

    fn lower_block(
        &mut self,
        stmts: &[Stmt],
        parent_ast: NodeId,
        ctx: MethodCtx,
    ) -> Result<Flow, CpgError> {
        let mut entry: Option<NodeId> = None;
        let mut open: Vec<NodeId> = Vec::new();
        for (i, stmt) in stmts.iter().enumerate() {
            let (s_entry, s_exits) = self.lower_stmt(stmt, parent_ast, ctx)?;
            if i == 0 {
                entry = Some(s_entry);
            } else {
                for &x in &open {
                    self.cpg.add_edge(x, s_entry, EdgeKind::Cfg)?;
                }
            }
            open = s_exits;
        }
        Ok(Flow { entry, exits: open })
    }

    fn lower_stmt(
        &mut self,
        stmt: &Stmt,
        parent_ast: NodeId,
        ctx: MethodCtx,
    ) -> Result<(NodeId, Vec<NodeId>), CpgError> {
        match stmt {
            Stmt::Assign { target, value, line } => {
                let code = format!("{} = {}", print_expr(target), print_expr(value));
                let call = self.cpg.add_node(
                    NodeKind::Call,
                    NodeAttrs::new()
                        .name(ops::OP_ASSIGNMENT)
                        .code(code)
                        .line(*line)
                        .method(ctx.method),
                )?;
                self.cpg.add_edge(parent_ast, call, EdgeKind::Ast)?;
                self.lower_expr(target, 1, call, ctx)?;
                self.lower_expr(value, 2, call, ctx)?;
                let stub = self.operator_stub(ops::OP_ASSIGNMENT)?;
                self.cpg.add_edge(call, stub, EdgeKind::Call)?;
                Ok((call, vec![call]))
            }
            Stmt::Expr { expr, .. } => {
                let top = self.lower_expr(expr, -1, parent_ast, ctx)?;
                Ok((top, vec![top]))
            }
            Stmt::If { cond, then_body, else_body, line } => {
                let cs = self.cpg.add_node(
                    NodeKind::ControlStructure,
                    NodeAttrs::new()
                        .code(format!("if ({})", print_expr(cond)))
                        .line(*line)
                        .method(ctx.method),
                )?;
                self.cpg.add_edge(parent_ast, cs, EdgeKind::Ast)?;
                let cond_top = self.lower_expr(cond, -1, cs, ctx)?;
                self.cpg.add_edge(cond_top, cs, EdgeKind::Cfg)?;
                let mut exits = Vec::new();
                let then_block = self.cpg.add_node(
                    NodeKind::Block,
                    NodeAttrs::new().line(*line).method(ctx.method),
                )?;
                self.cpg.add_edge(cs, then_block, EdgeKind::Ast)?;
                let tf = self.lower_block(then_body, then_block, ctx)?;
                match tf.entry {
                    Some(entry) => {
                        self.cpg.add_edge(cs, entry, EdgeKind::Cfg)?;
                        exits.extend(tf.exits);
                    }
                    None => exits.push(cs),
                }
                if else_body.is_empty() {
                    exits.push(cs);
                } else {
                    let else_block = self.cpg.add_node(
                        NodeKind::Block,
                        NodeAttrs::new().line(*line).method(ctx.method),
                    )?;
                    self.cpg.add_edge(cs, else_block, EdgeKind::Ast)?;
                    let ef = self.lower_block(else_body, else_block, ctx)?;
                    match ef.entry {
                        Some(entry) => {
                            self.cpg.add_edge(cs, entry, EdgeKind::Cfg)?;
                            exits.extend(ef.exits);
                        }
                        None => exits.push(cs),
                    }
                }
                exits.sort();
                exits.dedup();
                Ok((cond_top, exits))
            }
            Stmt::While { cond, body, line } => {
                let cs = self.cpg.add_node(
                    NodeKind::ControlStructure,
                    NodeAttrs::new()
                        .code(format!("while ({})", print_expr(cond)))
                        .line(*line)
                        .method(ctx.method),
                )?;
                self.cpg.add_edge(parent_ast, cs, EdgeKind::Ast)?;
                let cond_top = self.lower_expr(cond, -1, cs, ctx)?;
                self.cpg.add_edge(cond_top, cs, EdgeKind::Cfg)?;
                let body_block = self.cpg.add_node(
                    NodeKind::Block,
                    NodeAttrs::new().line(*line).method(ctx.method),
                )?;
                self.cpg.add_edge(cs, body_block, EdgeKind::Ast)?;
                let bf = self.lower_block(body, body_block, ctx)?;
                match bf.entry {
                    Some(entry) => self.cpg.add_edge(cs, entry, EdgeKind::Cfg)?,
                    None => self.cpg.add_edge(cs, cond_top, EdgeKind::Cfg)?,
                }
                for exit in bf.exits {
                    self.cpg.add_edge(exit, cond_top, EdgeKind::Cfg)?;
                }
                Ok((cond_top, vec![cs]))
            }
            Stmt::Return { value, line } => {
                let code = match value {
                    Some(v) => format!("return {}", print_expr(v)),
                    None => "return".to_string(),
                };
                let ret = self.cpg.add_node(
                    NodeKind::Return,
                    NodeAttrs::new().code(code).line(*line).method(ctx.method),
                )?;
                self.cpg.add_edge(parent_ast, ret, EdgeKind::Ast)?;
                let entry = match value {
                    Some(v) => {
                        let top = self.lower_expr(v, -1, ret, ctx)?;
                        self.cpg.add_edge(top, ret, EdgeKind::Cfg)?;
                        top
                    }
                    None => ret,
                };
                self.cpg.add_edge(ret, ctx.method_return, EdgeKind::Cfg)?;
                Ok((entry, Vec::new()))
            }
        }
    }

    /// Builds the node for one expression, attaching it to `ast_parent` and,
    /// when `argument_index` is non-negative, registering it as that
    /// argument of the parent call.
    fn lower_expr(
        &mut self,
        expr: &Expr,
        argument_index: i32,
        ast_parent: NodeId,
        ctx: MethodCtx,
    ) -> Result<NodeId, CpgError> {
        let node = match expr {
            Expr::Ident { name, line } => self.cpg.add_node(
                NodeKind::Identifier,
                NodeAttrs::new()
                    .name(name)
                    .code(name)
                    .argument_index(argument_index)
                    .line(*line)
                    .method(ctx.method),
            )?,
            Expr::Literal { value, line } => self.cpg.add_node(
                NodeKind::Literal,
                NodeAttrs::new()
                    .code(value.to_string())
                    .argument_index(argument_index)
                    .line(*line)
                    .method(ctx.method),
            )?,
            Expr::New { line } => {
                let call = self.new_call(ops::OP_ALLOC, "new()", argument_index, *line, ctx)?;
                let stub = self.operator_stub(ops::OP_ALLOC)?;
                self.cpg.add_edge(call, stub, EdgeKind::Call)?;
                call
            }
            Expr::Call { callee, args, line } => {
                let simple = callee.rsplit('.').next().unwrap_or(callee).to_string();
                let call =
                    self.new_call(&simple, &print_expr(expr), argument_index, *line, ctx)?;
                for (i, a) in args.iter().enumerate() {
                    self.lower_expr(a, i as i32 + 1, call, ctx)?;
                }
                let target = self.resolve_callee(callee)?;
                self.cpg.add_edge(call, target, EdgeKind::Call)?;
                call
            }
            Expr::MethodCall { receiver, method, args, line } => {
                let call =
                    self.new_call(method, &print_expr(expr), argument_index, *line, ctx)?;
                self.lower_expr(receiver, 0, call, ctx)?;
                for (i, a) in args.iter().enumerate() {
                    self.lower_expr(a, i as i32 + 1, call, ctx)?;
                }
                let target = self.resolve_receiver_method(method)?;
                self.cpg.add_edge(call, target, EdgeKind::Call)?;
                call
            }
            Expr::Binary { lhs, rhs, line, .. } => {
                let call =
                    self.new_call(ops::OP_BINARY, &print_expr(expr), argument_index, *line, ctx)?;
                self.lower_expr(lhs, 1, call, ctx)?;
                self.lower_expr(rhs, 2, call, ctx)?;
                let stub = self.operator_stub(ops::OP_BINARY)?;
                self.cpg.add_edge(call, stub, EdgeKind::Call)?;
                call
            }
            Expr::Index { base, index, line } => {
                let call = self.new_call(
                    ops::OP_INDEX_ACCESS,
                    &print_expr(expr),
                    argument_index,
                    *line,
                    ctx,
                )?;
                self.lower_expr(base, 1, call, ctx)?;
                self.lower_expr(index, 2, call, ctx)?;
                let stub = self.operator_stub(ops::OP_INDEX_ACCESS)?;
                self.cpg.add_edge(call, stub, EdgeKind::Call)?;
                call
            }
            Expr::Field { base, field, line } => {
                let call = self.new_call(
                    ops::OP_FIELD_ACCESS,
                    &print_expr(expr),
                    argument_index,
                    *line,
                    ctx,
                )?;
                self.lower_expr(base, 1, call, ctx)?;
                let name_node = self.cpg.add_node(
                    NodeKind::Literal,
                    NodeAttrs::new()
                        .code(field)
                        .argument_index(2)
                        .line(*line)
                        .method(ctx.method),
                )?;
                self.cpg.add_edge(call, name_node, EdgeKind::Ast)?;
                self.cpg.add_edge(call, name_node, EdgeKind::Argument)?;
                let stub = self.operator_stub(ops::OP_FIELD_ACCESS)?;
                self.cpg.add_edge(call, stub, EdgeKind::Call)?;
                call
            }
        };
        self.cpg.add_edge(ast_parent, node, EdgeKind::Ast)?;
        if argument_index >= 0 {
            self.cpg.add_edge(ast_parent, node, EdgeKind::Argument)?;
        }
        Ok(node)
    }

    fn new_call(
        &mut self,
        name: &str,
        code: &str,
        argument_index: i32,
        line: u32,
        ctx: MethodCtx,
    ) -> Result<NodeId, CpgError> {
        self.cpg.add_node(
            NodeKind::Call,
            NodeAttrs::new()
                .name(name)
                .code(code)
                .argument_index(argument_index)
                .line(line)
                .method(ctx.method),
        )
    }

    fn operator_stub(&mut self, full_name: &str) -> Result<NodeId, CpgError> {
        self.get_or_create_stub(full_name, full_name)
    }

    fn resolve_callee(&mut self, callee: &str) -> Result<NodeId, CpgError> {
        if let Some(&m) = self.methods.get(callee) {
            return Ok(m);
        }
        if let Some(&s) = self.stubs.get(callee) {
            return Ok(s);
        }
        let simple = callee.rsplit('.').next().unwrap_or(callee).to_string();
        self.get_or_create_stub(callee, &simple)
    }

    /// `recv.method(...)`: when exactly one declared extern's last segment
    /// matches the method name, the call resolves to it; otherwise to a
    /// stub keyed by the bare method name.
    fn resolve_receiver_method(&mut self, method: &str) -> Result<NodeId, CpgError> {
        if let Some(candidates) = self.extern_by_method_name.get(method) {
            if candidates.len() == 1 {
                let full_name = candidates[0].clone();
                return Ok(self.stubs[&full_name]);
            }
        }
        self.get_or_create_stub(method, method)
    }

    fn get_or_create_stub(&mut self, full_name: &str, simple: &str) -> Result<NodeId, CpgError> {
        if let Some(&s) = self.stubs.get(full_name) {
            return Ok(s);
        }
        let stub = self.cpg.add_node(
            NodeKind::ExternalMethodStub,
            NodeAttrs::new().name(simple).full_name(full_name).code(full_name),
        )?;
        self.stubs.insert(full_name.to_string(), stub);
        Ok(stub)
    }
}
