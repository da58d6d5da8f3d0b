//! Lowering from the AST to the graph IR.
//!
//! Loops are fully unrolled (the loop variable becomes a compile-time
//! constant per iteration), `+=` accumulation chains collapse into balanced
//! binary adder trees of depth `ceil(log2 k)`, and every add/mul node takes
//! the declared width of the statement's target. Integer literals become
//! synthesized input nodes (one per distinct constant, value recorded in
//! the binding table). After all statements run, each declared output's
//! final value is collapsed and wired to an output node; values that do not
//! reach any output are pruned. Node ids are renumbered to
//! inputs-then-ops-then-outputs, preserving creation order within each
//! block, which keeps ids topological.

use super::ast::*;
use crate::dfg::{Dfg, Node, NodeKind};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LowerError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> LowerError {
    LowerError {
        line,
        message: message.into(),
    }
}

/// Where an input node's runtime value comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputSource {
    Scalar(String),
    Element(String, u64),
    Const(u64),
}

/// Width used to mask constants (they carry no declaration).
pub const CONST_WIDTH: u8 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputBinding {
    pub node: usize,
    pub source: InputSource,
    /// Declared width of the feeding value; runtime inputs are masked to
    /// this many bits before use.
    pub bitwidth: u8,
}

/// Where an output node's value goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputSink {
    Scalar(String),
    Element(String, u64),
}

impl OutputSink {
    /// Canonical result-map key: `name` or `name[i]`.
    pub fn key(&self) -> String {
        match self {
            OutputSink::Scalar(name) => name.clone(),
            OutputSink::Element(name, i) => format!("{name}[{i}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputBinding {
    pub node: usize,
    pub sink: OutputSink,
}

/// A lowered program: the graph plus the I/O binding tables the
/// interpreters need.
#[derive(Clone, Debug)]
pub struct Lowered {
    pub dfg: Dfg,
    pub inputs: Vec<InputBinding>,
    pub outputs: Vec<OutputBinding>,
}

#[derive(Copy, Clone, Debug)]
struct DeclInfo {
    kind: DeclKind,
    width: u8,
    array_len: Option<u64>,
}

/// Value slot: a scalar variable or one array element.
type SlotKey = (String, Option<u64>);

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    bindings: Vec<InputBinding>,
    const_nodes: BTreeMap<u64, usize>,
    scalar_inputs: BTreeMap<String, usize>,
    element_inputs: BTreeMap<(String, u64), usize>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            nodes: Vec::new(),
            edges: Vec::new(),
            bindings: Vec::new(),
            const_nodes: BTreeMap::new(),
            scalar_inputs: BTreeMap::new(),
            element_inputs: BTreeMap::new(),
        }
    }

    fn input_node(&mut self, source: InputSource, bitwidth: u8) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::new(id, NodeKind::Input, 0));
        self.bindings.push(InputBinding {
            node: id,
            source,
            bitwidth,
        });
        id
    }

    fn const_node(&mut self, value: u64) -> usize {
        if let Some(&id) = self.const_nodes.get(&value) {
            return id;
        }
        let id = self.input_node(InputSource::Const(value), CONST_WIDTH);
        self.const_nodes.insert(value, id);
        id
    }

    fn scalar_input(&mut self, name: &str, width: u8) -> usize {
        if let Some(&id) = self.scalar_inputs.get(name) {
            return id;
        }
        let id = self.input_node(InputSource::Scalar(name.to_string()), width);
        self.scalar_inputs.insert(name.to_string(), id);
        id
    }

    fn element_input(&mut self, name: &str, index: u64, width: u8) -> usize {
        if let Some(&id) = self.element_inputs.get(&(name.to_string(), index)) {
            return id;
        }
        let id = self.input_node(InputSource::Element(name.to_string(), index), width);
        self.element_inputs.insert((name.to_string(), index), id);
        id
    }

    fn op_node(&mut self, kind: NodeKind, width: u8, lhs: usize, rhs: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::new(id, kind, width));
        self.edges.push((lhs, id));
        self.edges.push((rhs, id));
        id
    }

    fn output_node(&mut self, value: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::new(id, NodeKind::Output, 0));
        self.edges.push((value, id));
        id
    }
}

struct LowerCtx {
    decls: BTreeMap<String, DeclInfo>,
    builder: Builder,
    slots: BTreeMap<SlotKey, Vec<usize>>,
    /// Loop bindings, innermost last (shadowing allowed).
    loop_env: Vec<(String, u64)>,
    outputs: Vec<OutputBinding>,
}

impl LowerCtx {
    fn loop_value(&self, name: &str) -> Option<u64> {
        self.loop_env
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    /// Evaluates an index expression to a constant under the current loop
    /// bindings.
    fn eval_index(&self, expr: &Expr, line: usize) -> Result<u64, LowerError> {
        match expr {
            Expr::Const(v) => Ok(*v),
            Expr::Var(name) => self.loop_value(name).ok_or_else(|| {
                err(
                    line,
                    format!("index must be constant; `{name}` is not a loop variable"),
                )
            }),
            Expr::Add(a, b) => {
                let (a, b) = (self.eval_index(a, line)?, self.eval_index(b, line)?);
                a.checked_add(b)
                    .ok_or_else(|| err(line, "index expression overflows"))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.eval_index(a, line)?, self.eval_index(b, line)?);
                a.checked_mul(b)
                    .ok_or_else(|| err(line, "index expression overflows"))
            }
            Expr::Index(name, _) => Err(err(
                line,
                format!("`{name}[...]` cannot appear inside an index expression"),
            )),
        }
    }

    /// Collapses a slot's accumulated terms into a balanced adder tree at
    /// the slot's declared width and caches the single resulting node.
    fn collapse(&mut self, key: &SlotKey, width: u8) -> usize {
        let mut terms = self.slots.get(key).cloned().expect("caller checked slot");
        while terms.len() > 1 {
            let mut next = Vec::with_capacity(terms.len().div_ceil(2));
            for pair in terms.chunks(2) {
                if pair.len() == 2 {
                    next.push(self.builder.op_node(NodeKind::Add, width, pair[0], pair[1]));
                } else {
                    next.push(pair[0]);
                }
            }
            terms = next;
        }
        let root = terms[0];
        self.slots.insert(key.clone(), vec![root]);
        root
    }

    /// Resolves a value reference (scalar name or array element) to a node.
    fn resolve(&mut self, name: &str, index: Option<u64>, line: usize) -> Result<usize, LowerError> {
        if index.is_none() {
            if let Some(v) = self.loop_value(name) {
                return Ok(self.builder.const_node(v));
            }
        }
        let decl = *self
            .decls
            .get(name)
            .ok_or_else(|| err(line, format!("unknown identifier `{name}`")))?;
        match (decl.array_len, index) {
            (None, Some(_)) => {
                return Err(err(line, format!("`{name}` is a scalar and cannot be indexed")));
            }
            (Some(_), None) => {
                return Err(err(line, format!("`{name}` is an array and requires an index")));
            }
            (Some(len), Some(i)) if i >= len => {
                return Err(err(
                    line,
                    format!("index {i} out of bounds for `{name}` (length {len})"),
                ));
            }
            _ => {}
        }
        match decl.kind {
            DeclKind::In => Ok(match index {
                None => self.builder.scalar_input(name, decl.width),
                Some(i) => self.builder.element_input(name, i, decl.width),
            }),
            DeclKind::Out | DeclKind::Var => {
                let key = (name.to_string(), index);
                if self.slots.get(&key).map_or(true, |t| t.is_empty()) {
                    return Err(err(
                        line,
                        format!("`{}` is read before it is assigned", slot_name(&key)),
                    ));
                }
                Ok(self.collapse(&key, decl.width))
            }
        }
    }

    /// Lowers an expression tree; every operation takes `width`.
    fn lower_expr(&mut self, expr: &Expr, width: u8, line: usize) -> Result<usize, LowerError> {
        match expr {
            Expr::Const(v) => Ok(self.builder.const_node(*v)),
            Expr::Var(name) => self.resolve(name, None, line),
            Expr::Index(name, idx) => {
                let i = self.eval_index(idx, line)?;
                self.resolve(name, Some(i), line)
            }
            Expr::Add(a, b) => {
                let lhs = self.lower_expr(a, width, line)?;
                let rhs = self.lower_expr(b, width, line)?;
                Ok(self.builder.op_node(NodeKind::Add, width, lhs, rhs))
            }
            Expr::Mul(a, b) => {
                let lhs = self.lower_expr(a, width, line)?;
                let rhs = self.lower_expr(b, width, line)?;
                Ok(self.builder.op_node(NodeKind::Mul, width, lhs, rhs))
            }
        }
    }

    fn lower_stmt(&mut self, stmt: &Stmt) -> Result<(), LowerError> {
        match stmt {
            Stmt::For(f) => {
                for i in f.start..f.end {
                    self.loop_env.push((f.var.clone(), i));
                    for s in &f.body {
                        self.lower_stmt(s)?;
                    }
                    self.loop_env.pop();
                }
                Ok(())
            }
            Stmt::Assign(a) => {
                let decl = *self
                    .decls
                    .get(&a.target)
                    .ok_or_else(|| err(a.line, format!("unknown identifier `{}`", a.target)))?;
                if decl.kind == DeclKind::In {
                    return Err(err(a.line, format!("cannot assign to input `{}`", a.target)));
                }
                let index = match (&a.index, decl.array_len) {
                    (None, None) => None,
                    (Some(idx), Some(len)) => {
                        let i = self.eval_index(idx, a.line)?;
                        if i >= len {
                            return Err(err(
                                a.line,
                                format!(
                                    "index {i} out of bounds for `{}` (length {len})",
                                    a.target
                                ),
                            ));
                        }
                        Some(i)
                    }
                    (Some(_), None) => {
                        return Err(err(
                            a.line,
                            format!("`{}` is a scalar and cannot be indexed", a.target),
                        ));
                    }
                    (None, Some(_)) => {
                        return Err(err(
                            a.line,
                            format!("`{}` is an array and requires an index", a.target),
                        ));
                    }
                };

                let root = self.lower_expr(&a.expr, decl.width, a.line)?;

                for pragma in &a.pragmas {
                    if pragma.var != a.target {
                        return Err(err(
                            pragma.line,
                            format!(
                                "directive names `{}` but the next statement assigns `{}`",
                                pragma.var, a.target
                            ),
                        ));
                    }
                    if self.builder.nodes[root].kind != NodeKind::Mul {
                        return Err(err(
                            pragma.line,
                            format!(
                                "directive on `{}` requires the statement's result to be a multiply",
                                pragma.var
                            ),
                        ));
                    }
                    self.builder.nodes[root].lut_pragma = true;
                }

                let key = (a.target.clone(), index);
                if a.accumulate {
                    self.slots.entry(key).or_default().push(root);
                } else {
                    self.slots.insert(key, vec![root]);
                }
                Ok(())
            }
        }
    }
}

fn slot_name(key: &SlotKey) -> String {
    match key.1 {
        None => key.0.clone(),
        Some(i) => format!("{}[{i}]", key.0),
    }
}

/// Lowers a parsed program to the graph IR. See the module docs for the
/// semantics; every semantic problem is reported with its source line.
pub fn lower(program: &Program) -> Result<Lowered, LowerError> {
    let mut decls = BTreeMap::new();
    for d in &program.decls {
        if !(2..=32).contains(&d.width) {
            return Err(err(
                d.line,
                format!("bitwidth {} outside the supported 2..=32 range", d.width),
            ));
        }
        if d.array_len == Some(0) {
            return Err(err(d.line, format!("array `{}` must have nonzero length", d.name)));
        }
        if decls
            .insert(
                d.name.clone(),
                DeclInfo {
                    kind: d.kind,
                    width: d.width as u8,
                    array_len: d.array_len,
                },
            )
            .is_some()
        {
            return Err(err(d.line, format!("duplicate declaration of `{}`", d.name)));
        }
    }

    let mut ctx = LowerCtx {
        decls,
        builder: Builder::new(),
        slots: BTreeMap::new(),
        loop_env: Vec::new(),
        outputs: Vec::new(),
    };
    for stmt in &program.stmts {
        ctx.lower_stmt(stmt)?;
    }

    // Wire every declared output (every element, for arrays).
    for d in &program.decls {
        if d.kind != DeclKind::Out {
            continue;
        }
        let info = ctx.decls[&d.name];
        let indices: Vec<Option<u64>> = match info.array_len {
            None => vec![None],
            Some(len) => (0..len).map(Some).collect(),
        };
        for index in indices {
            let key = (d.name.clone(), index);
            if ctx.slots.get(&key).map_or(true, |t| t.is_empty()) {
                return Err(err(
                    d.line,
                    format!("output `{}` is never assigned", slot_name(&key)),
                ));
            }
            let value = ctx.collapse(&key, info.width);
            let node = ctx.builder.output_node(value);
            ctx.outputs.push(OutputBinding {
                node,
                sink: match index {
                    None => OutputSink::Scalar(d.name.clone()),
                    Some(i) => OutputSink::Element(d.name.clone(), i),
                },
            });
        }
    }

    Ok(prune_and_renumber(ctx))
}

/// Drops nodes that do not reach an output, then renumbers ids into
/// inputs-ops-outputs block order (creation order within each block).
fn prune_and_renumber(ctx: LowerCtx) -> Lowered {
    let n = ctx.builder.nodes.len();
    let mut preds = vec![Vec::new(); n];
    for &(src, dst) in &ctx.builder.edges {
        preds[dst].push(src);
    }

    let mut keep = vec![false; n];
    let mut stack: Vec<usize> = ctx.outputs.iter().map(|o| o.node).collect();
    for &node in &stack {
        keep[node] = true;
    }
    while let Some(node) = stack.pop() {
        for &p in &preds[node] {
            if !keep[p] {
                keep[p] = true;
                stack.push(p);
            }
        }
    }

    let block = |kind: NodeKind| -> usize {
        match kind {
            NodeKind::Input => 0,
            NodeKind::Add | NodeKind::Mul => 1,
            NodeKind::Output => 2,
        }
    };
    let mut order: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    order.sort_by_key(|&i| (block(ctx.builder.nodes[i].kind), i));

    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::with_capacity(order.len());
    for (new_id, &old_id) in order.iter().enumerate() {
        remap[old_id] = new_id;
        let mut node = ctx.builder.nodes[old_id];
        node.id = new_id;
        nodes.push(node);
    }
    let edges: Vec<(usize, usize)> = ctx
        .builder
        .edges
        .iter()
        .filter(|&&(s, d)| keep[s] && keep[d])
        .map(|&(s, d)| (remap[s], remap[d]))
        .collect();

    let inputs: Vec<InputBinding> = ctx
        .builder
        .bindings
        .into_iter()
        .filter(|b| keep[b.node])
        .map(|b| InputBinding {
            node: remap[b.node],
            ..b
        })
        .collect();
    let outputs: Vec<OutputBinding> = ctx
        .outputs
        .into_iter()
        .map(|o| OutputBinding {
            node: remap[o.node],
            sink: o.sink,
        })
        .collect();

    Lowered {
        dfg: Dfg::new("kernel", nodes, edges),
        inputs,
        outputs,
    }
}
