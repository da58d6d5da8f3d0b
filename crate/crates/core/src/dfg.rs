//! Data-flow graph intermediate representation.
//!
//! A [`Dfg`] is a directed acyclic graph of [`Node`]s. Inputs feed operation
//! nodes (adds and multiplies, each with exactly two operands); values that
//! leave the graph do so through output nodes. Multiplier nodes carry a
//! `lut_pragma` flag selecting LUT-based implementation instead of DSP
//! blocks; the flag vector over all multipliers (in id order) is an
//! [`Assignment`] and is the knob every search engine in this crate turns.
//!
//! Invariants (checked by [`Dfg::validate`], never silently repaired):
//! - node ids are dense `0..n-1` and match their position,
//! - every edge endpoint exists,
//! - the graph is acyclic,
//! - inputs have in-degree 0, outputs have out-degree 0,
//! - adds and muls have in-degree exactly 2 (parallel edges allowed, so
//!   `x * x` is representable),
//! - operation bitwidths lie in `2..=32`; input/output nodes carry bitwidth 0,
//! - `lut_pragma` is only set on muls.
//!
//! The JSON form is canonical: struct fields serialize in alphabetical
//! order, pretty-printed with two-space indentation and a trailing newline,
//! so a graph always serializes to the same bytes.

use crate::io::atomic_write;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

/// Node operation kind. The fixed one-hot order used by the feature
/// encoding is `[Input, Add, Mul, Output]`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Add,
    Mul,
    Output,
}

impl NodeKind {
    /// Position of this kind in the one-hot feature block.
    pub fn one_hot_index(self) -> usize {
        match self {
            NodeKind::Input => 0,
            NodeKind::Add => 1,
            NodeKind::Mul => 2,
            NodeKind::Output => 3,
        }
    }

    /// True for the two operation kinds (add, mul).
    pub fn is_op(self) -> bool {
        matches!(self, NodeKind::Add | NodeKind::Mul)
    }
}

/// A single graph node.
///
/// Fields are declared in alphabetical order; together with
/// [`Dfg::to_json_string`] this yields a canonical JSON byte form.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    /// Operand width in bits: `2..=32` for adds/muls, `0` for inputs/outputs.
    pub bitwidth: u8,
    /// Dense id; must equal the node's index in the node list.
    pub id: usize,
    pub kind: NodeKind,
    /// LUT-implementation directive; meaningful (and legal) only on muls.
    pub lut_pragma: bool,
}

impl Node {
    pub fn new(id: usize, kind: NodeKind, bitwidth: u8) -> Self {
        Node {
            bitwidth,
            id,
            kind,
            lut_pragma: false,
        }
    }
}

/// Directed data-flow graph. See the module docs for the invariants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dfg {
    edges: Vec<(usize, usize)>,
    name: String,
    nodes: Vec<Node>,
}

/// One invariant violation found by [`Dfg::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("node at position {index} has id {id}; ids must be dense 0..n-1")]
    NonDenseId { index: usize, id: usize },
    #[error("edge {index} = ({src}, {dst}) references a missing node (graph has {node_count} nodes)")]
    DanglingEdge {
        index: usize,
        src: usize,
        dst: usize,
        node_count: usize,
    },
    #[error("cycle through nodes {nodes:?}")]
    Cycle { nodes: Vec<usize> },
    #[error("input node {node} has in-degree {in_degree}; inputs take no operands")]
    InputWithOperands { node: usize, in_degree: usize },
    #[error("output node {node} has out-degree {out_degree}; outputs feed nothing")]
    OutputWithConsumers { node: usize, out_degree: usize },
    #[error("{kind:?} node {node} has in-degree {in_degree}; operations take exactly 2 operands")]
    BadOperandCount {
        node: usize,
        kind: NodeKind,
        in_degree: usize,
    },
    #[error("{kind:?} node {node} has bitwidth {bitwidth}; operations require 2..=32")]
    OpBitwidthOutOfRange {
        node: usize,
        kind: NodeKind,
        bitwidth: u8,
    },
    #[error("{kind:?} node {node} has bitwidth {bitwidth}; inputs/outputs carry bitwidth 0")]
    IoBitwidthNonZero {
        node: usize,
        kind: NodeKind,
        bitwidth: u8,
    },
    #[error("node {node} ({kind:?}) carries lut_pragma; the directive applies only to muls")]
    PragmaOnNonMul { node: usize, kind: NodeKind },
}

/// Per-multiplier LUT directive vector, ordered by multiplier node id.
pub type Assignment = Vec<bool>;

/// Error applying an [`Assignment`] whose length does not match the
/// multiplier count.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("assignment has {actual} flags but the graph has {expected} multipliers")]
pub struct AssignmentLenMismatch {
    pub expected: usize,
    pub actual: usize,
}

/// Error type for reading a graph from JSON.
#[derive(Debug, Error)]
pub enum DfgJsonError {
    #[error("failed to parse DFG JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Dfg {
    /// Builds a graph without validating it; call [`Dfg::validate`] to
    /// check the invariants.
    pub fn new(name: impl Into<String>, nodes: Vec<Node>, edges: Vec<(usize, usize)>) -> Self {
        Dfg {
            edges,
            name: name.into(),
            nodes,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Ids of all multiplier nodes, ascending.
    pub fn mul_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Mul)
            .map(|n| n.id)
            .collect()
    }

    pub fn mul_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Mul).count()
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Number of operation (add/mul) nodes.
    pub fn op_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind.is_op()).count()
    }

    /// Current LUT directive vector over muls, in id order.
    pub fn assignment(&self) -> Assignment {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Mul)
            .map(|n| n.lut_pragma)
            .collect()
    }

    /// Returns a copy with the given directive vector applied to the muls
    /// in id order. All other nodes are untouched.
    pub fn with_assignment(&self, assignment: &[bool]) -> Result<Dfg, AssignmentLenMismatch> {
        let muls = self.mul_ids();
        if muls.len() != assignment.len() {
            return Err(AssignmentLenMismatch {
                expected: muls.len(),
                actual: assignment.len(),
            });
        }
        let mut out = self.clone();
        for (mul_id, &flag) in muls.iter().zip(assignment) {
            out.nodes[*mul_id].lut_pragma = flag;
        }
        Ok(out)
    }

    /// Sets the directive flags in place. Same contract as
    /// [`Dfg::with_assignment`].
    pub fn set_assignment(&mut self, assignment: &[bool]) -> Result<(), AssignmentLenMismatch> {
        let muls = self.mul_ids();
        if muls.len() != assignment.len() {
            return Err(AssignmentLenMismatch {
                expected: muls.len(),
                actual: assignment.len(),
            });
        }
        for (mul_id, &flag) in muls.iter().zip(assignment) {
            self.nodes[*mul_id].lut_pragma = flag;
        }
        Ok(())
    }

    /// Predecessor lists (with multiplicity, in edge order) per node.
    /// Ignores out-of-range edges so it is safe on unvalidated graphs.
    pub fn preds(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut preds = vec![Vec::new(); n];
        for &(src, dst) in &self.edges {
            if src < n && dst < n {
                preds[dst].push(src);
            }
        }
        preds
    }

    /// Successor lists (with multiplicity, in edge order) per node.
    pub fn succs(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut succs = vec![Vec::new(); n];
        for &(src, dst) in &self.edges {
            if src < n && dst < n {
                succs[src].push(dst);
            }
        }
        succs
    }

    /// Deterministic topological order (smallest ready id first), or `None`
    /// if the graph (restricted to in-range edges) has a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let succs = self.succs();
        let mut in_deg = vec![0usize; n];
        for &(src, dst) in &self.edges {
            if src < n && dst < n {
                in_deg[dst] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| in_deg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for &succ in &succs[next] {
                in_deg[succ] -= 1;
                if in_deg[succ] == 0 {
                    ready.insert(succ);
                }
            }
        }
        if order.len() == n {
            Some(order)
        } else {
            None
        }
    }

    /// Checks every invariant and returns all violations found (empty means
    /// the graph is valid). Never repairs anything.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.nodes.len();
        let mut violations = Vec::new();

        for (index, node) in self.nodes.iter().enumerate() {
            if node.id != index {
                violations.push(Violation::NonDenseId {
                    index,
                    id: node.id,
                });
            }
        }

        let mut in_deg = vec![0usize; n];
        let mut out_deg = vec![0usize; n];
        for (index, &(src, dst)) in self.edges.iter().enumerate() {
            if src >= n || dst >= n {
                violations.push(Violation::DanglingEdge {
                    index,
                    src,
                    dst,
                    node_count: n,
                });
            } else {
                out_deg[src] += 1;
                in_deg[dst] += 1;
            }
        }

        if self.topo_order().is_none() {
            // Report exactly the nodes left unplaced by the topological
            // sort: those on or downstream of a cycle.
            let mut deg = vec![0usize; n];
            for &(src, dst) in &self.edges {
                if src < n && dst < n {
                    deg[dst] += 1;
                }
            }
            let succs = self.succs();
            let mut ready: BTreeSet<usize> = (0..n).filter(|&i| deg[i] == 0).collect();
            let mut placed = vec![false; n];
            while let Some(&next) = ready.iter().next() {
                ready.remove(&next);
                placed[next] = true;
                for &succ in &succs[next] {
                    deg[succ] -= 1;
                    if deg[succ] == 0 {
                        ready.insert(succ);
                    }
                }
            }
            let nodes: Vec<usize> = (0..n).filter(|&i| !placed[i]).collect();
            violations.push(Violation::Cycle { nodes });
        }

        for node in &self.nodes {
            let id = node.id.min(n.saturating_sub(1));
            match node.kind {
                NodeKind::Input => {
                    if in_deg[id] != 0 {
                        violations.push(Violation::InputWithOperands {
                            node: node.id,
                            in_degree: in_deg[id],
                        });
                    }
                    if node.bitwidth != 0 {
                        violations.push(Violation::IoBitwidthNonZero {
                            node: node.id,
                            kind: node.kind,
                            bitwidth: node.bitwidth,
                        });
                    }
                }
                NodeKind::Output => {
                    if out_deg[id] != 0 {
                        violations.push(Violation::OutputWithConsumers {
                            node: node.id,
                            out_degree: out_deg[id],
                        });
                    }
                    if node.bitwidth != 0 {
                        violations.push(Violation::IoBitwidthNonZero {
                            node: node.id,
                            kind: node.kind,
                            bitwidth: node.bitwidth,
                        });
                    }
                }
                NodeKind::Add | NodeKind::Mul => {
                    if in_deg[id] != 2 {
                        violations.push(Violation::BadOperandCount {
                            node: node.id,
                            kind: node.kind,
                            in_degree: in_deg[id],
                        });
                    }
                    if !(2..=32).contains(&node.bitwidth) {
                        violations.push(Violation::OpBitwidthOutOfRange {
                            node: node.id,
                            kind: node.kind,
                            bitwidth: node.bitwidth,
                        });
                    }
                }
            }
            if node.lut_pragma && node.kind != NodeKind::Mul {
                violations.push(Violation::PragmaOnNonMul {
                    node: node.id,
                    kind: node.kind,
                });
            }
        }

        violations
    }

    /// True when [`Dfg::validate`] finds nothing.
    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Canonical JSON: alphabetical keys, two-space pretty print, trailing
    /// newline. The same graph always produces the same bytes.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("DFG serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(json: &str) -> Result<Dfg, DfgJsonError> {
        Ok(serde_json::from_str(json)?)
    }

    /// Writes the canonical JSON atomically (temp file + rename).
    pub fn write_json(&self, path: &Path) -> Result<(), DfgJsonError> {
        atomic_write(path, self.to_json_string().as_bytes()).map_err(|source| DfgJsonError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_json(path: &Path) -> Result<Dfg, DfgJsonError> {
        let text = std::fs::read_to_string(path).map_err(|source| DfgJsonError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Dfg::from_json_str(&text)
    }
}
