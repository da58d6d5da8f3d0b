//! Two independent evaluators for kernel programs, used to cross-check the
//! lowering: one walks the AST directly, the other executes the lowered
//! graph. Both compute over unsigned modular arithmetic.
//!
//! Width semantics live on operations: every add/multiply truncates its
//! result to the width of the statement's target (the node's width in the
//! graph), runtime inputs are truncated to their declared width on entry,
//! and integer literals (and loop variables used as values) are truncated
//! to [`CONST_WIDTH`] bits. A bare copy `y = t;` performs no arithmetic and
//! therefore no truncation, matching the graph, which has no copy nodes.
//!
//! Inputs and results are keyed by `name` for scalars and `name[i]` for
//! array elements.

use super::ast::*;
use super::lower::{InputSource, Lowered, CONST_WIDTH};
use crate::dfg::NodeKind;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
}

fn sem(line: usize, message: impl Into<String>) -> InterpError {
    InterpError::Semantic {
        line,
        message: message.into(),
    }
}

/// Low-bit mask for a width in bits (width 64 keeps the full value).
pub fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Executes the lowered graph on the given inputs.
pub fn eval_dfg(
    lowered: &Lowered,
    inputs: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, u64>, InterpError> {
    let dfg = &lowered.dfg;
    let mut values = vec![0u64; dfg.node_count()];
    for b in &lowered.inputs {
        let raw = match &b.source {
            InputSource::Const(v) => *v,
            InputSource::Scalar(name) => *inputs
                .get(name)
                .ok_or_else(|| InterpError::MissingInput(name.clone()))?,
            InputSource::Element(name, i) => {
                let key = format!("{name}[{i}]");
                *inputs
                    .get(&key)
                    .ok_or(InterpError::MissingInput(key))?
            }
        };
        values[b.node] = raw & mask(b.bitwidth);
    }

    let preds = dfg.preds();
    for id in dfg.topo_order().expect("lowered graphs are acyclic") {
        let node = dfg.node(id);
        match node.kind {
            NodeKind::Input => {}
            NodeKind::Add => {
                let p = &preds[id];
                values[id] = values[p[0]].wrapping_add(values[p[1]]) & mask(node.bitwidth);
            }
            NodeKind::Mul => {
                let p = &preds[id];
                values[id] = values[p[0]].wrapping_mul(values[p[1]]) & mask(node.bitwidth);
            }
            NodeKind::Output => values[id] = values[preds[id][0]],
        }
    }

    Ok(lowered
        .outputs
        .iter()
        .map(|b| (b.sink.key(), values[b.node]))
        .collect())
}

#[derive(Copy, Clone)]
struct DeclInfo {
    kind: DeclKind,
    width: u8,
    array_len: Option<u64>,
    line: usize,
}

struct AstState<'a> {
    decls: BTreeMap<String, DeclInfo>,
    slots: BTreeMap<(String, Option<u64>), u64>,
    loops: Vec<(String, u64)>,
    inputs: &'a BTreeMap<String, u64>,
}

impl AstState<'_> {
    fn loop_value(&self, name: &str) -> Option<u64> {
        self.loops
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    fn eval_index(&self, expr: &Expr, line: usize) -> Result<u64, InterpError> {
        match expr {
            Expr::Const(v) => Ok(*v),
            Expr::Var(name) => self.loop_value(name).ok_or_else(|| {
                sem(
                    line,
                    format!("index must be constant; `{name}` is not a loop variable"),
                )
            }),
            Expr::Add(a, b) => {
                let (a, b) = (self.eval_index(a, line)?, self.eval_index(b, line)?);
                a.checked_add(b)
                    .ok_or_else(|| sem(line, "index expression overflows"))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.eval_index(a, line)?, self.eval_index(b, line)?);
                a.checked_mul(b)
                    .ok_or_else(|| sem(line, "index expression overflows"))
            }
            Expr::Index(name, _) => Err(sem(
                line,
                format!("`{name}[...]` cannot appear inside an index expression"),
            )),
        }
    }

    fn read(&self, name: &str, index: Option<u64>, line: usize) -> Result<u64, InterpError> {
        if index.is_none() {
            if let Some(v) = self.loop_value(name) {
                return Ok(v & mask(CONST_WIDTH));
            }
        }
        let decl = *self
            .decls
            .get(name)
            .ok_or_else(|| sem(line, format!("unknown identifier `{name}`")))?;
        match (decl.array_len, index) {
            (None, Some(_)) => {
                return Err(sem(line, format!("`{name}` is a scalar and cannot be indexed")));
            }
            (Some(_), None) => {
                return Err(sem(line, format!("`{name}` is an array and requires an index")));
            }
            (Some(len), Some(i)) if i >= len => {
                return Err(sem(
                    line,
                    format!("index {i} out of bounds for `{name}` (length {len})"),
                ));
            }
            _ => {}
        }
        match decl.kind {
            DeclKind::In => {
                let key = match index {
                    None => name.to_string(),
                    Some(i) => format!("{name}[{i}]"),
                };
                let raw = *self
                    .inputs
                    .get(&key)
                    .ok_or(InterpError::MissingInput(key))?;
                Ok(raw & mask(decl.width))
            }
            DeclKind::Out | DeclKind::Var => self
                .slots
                .get(&(name.to_string(), index))
                .copied()
                .ok_or_else(|| {
                    sem(
                        line,
                        format!("`{}` is read before it is assigned", slot_key(name, index)),
                    )
                }),
        }
    }

    fn eval_expr(&self, expr: &Expr, width: u8, line: usize) -> Result<u64, InterpError> {
        match expr {
            Expr::Const(v) => Ok(*v & mask(CONST_WIDTH)),
            Expr::Var(name) => self.read(name, None, line),
            Expr::Index(name, idx) => {
                let i = self.eval_index(idx, line)?;
                self.read(name, Some(i), line)
            }
            Expr::Add(a, b) => {
                let (a, b) = (self.eval_expr(a, width, line)?, self.eval_expr(b, width, line)?);
                Ok(a.wrapping_add(b) & mask(width))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.eval_expr(a, width, line)?, self.eval_expr(b, width, line)?);
                Ok(a.wrapping_mul(b) & mask(width))
            }
        }
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<(), InterpError> {
        match stmt {
            Stmt::For(f) => {
                for i in f.start..f.end {
                    self.loops.push((f.var.clone(), i));
                    for s in &f.body {
                        self.exec(s)?;
                    }
                    self.loops.pop();
                }
                Ok(())
            }
            Stmt::Assign(a) => {
                let decl = *self
                    .decls
                    .get(&a.target)
                    .ok_or_else(|| sem(a.line, format!("unknown identifier `{}`", a.target)))?;
                if decl.kind == DeclKind::In {
                    return Err(sem(a.line, format!("cannot assign to input `{}`", a.target)));
                }
                let index = match (&a.index, decl.array_len) {
                    (None, None) => None,
                    (Some(idx), Some(len)) => {
                        let i = self.eval_index(idx, a.line)?;
                        if i >= len {
                            return Err(sem(
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
                        return Err(sem(
                            a.line,
                            format!("`{}` is a scalar and cannot be indexed", a.target),
                        ));
                    }
                    (None, Some(_)) => {
                        return Err(sem(
                            a.line,
                            format!("`{}` is an array and requires an index", a.target),
                        ));
                    }
                };
                let value = self.eval_expr(&a.expr, decl.width, a.line)?;
                let key = (a.target.clone(), index);
                if a.accumulate {
                    match self.slots.get(&key) {
                        // `+=` on an unassigned slot starts the accumulation.
                        None => self.slots.insert(key, value),
                        Some(&old) => self
                            .slots
                            .insert(key, old.wrapping_add(value) & mask(decl.width)),
                    };
                } else {
                    self.slots.insert(key, value);
                }
                Ok(())
            }
        }
    }
}

fn slot_key(name: &str, index: Option<u64>) -> String {
    match index {
        None => name.to_string(),
        Some(i) => format!("{name}[{i}]"),
    }
}

/// Executes the program by walking the AST, independently of the lowering.
///
/// Unlike [`eval_dfg`], this runs dead statements too, so it requires every
/// input the program text reads, not just those reaching an output.
pub fn eval_program(
    program: &Program,
    inputs: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, u64>, InterpError> {
    let mut decls = BTreeMap::new();
    for d in &program.decls {
        if !(2..=32).contains(&d.width) {
            return Err(sem(
                d.line,
                format!("bitwidth {} outside the supported 2..=32 range", d.width),
            ));
        }
        if decls
            .insert(
                d.name.clone(),
                DeclInfo {
                    kind: d.kind,
                    width: d.width as u8,
                    array_len: d.array_len,
                    line: d.line,
                },
            )
            .is_some()
        {
            return Err(sem(d.line, format!("duplicate declaration of `{}`", d.name)));
        }
    }

    let mut st = AstState {
        decls,
        slots: BTreeMap::new(),
        loops: Vec::new(),
        inputs,
    };
    for stmt in &program.stmts {
        st.exec(stmt)?;
    }

    let mut out = BTreeMap::new();
    for d in &program.decls {
        if d.kind != DeclKind::Out {
            continue;
        }
        let info = st.decls[&d.name];
        let indices: Vec<Option<u64>> = match info.array_len {
            None => vec![None],
            Some(len) => (0..len).map(Some).collect(),
        };
        for index in indices {
            let value = st.slots.get(&(d.name.clone(), index)).copied().ok_or_else(|| {
                sem(
                    info.line,
                    format!("output `{}` is never assigned", slot_key(&d.name, index)),
                )
            })?;
            out.insert(slot_key(&d.name, index), value);
        }
    }
    Ok(out)
}
