//! Node-feature encoding and normalized adjacency for the graph network.
//!
//! Each node maps to a 10-dimensional feature row:
//! - dims 0..4: one-hot node kind in the fixed order `[input, add, mul, output]`,
//! - dims 4..9: for adds/muls, `bitwidth - 1` as a 5-bit MSB-first binary
//!   code (bitwidths 2..=32 give codes 1..=31); all zeros for inputs/outputs,
//! - dim 9: the LUT directive flag (1.0 if set).
//!
//! The adjacency is the symmetrically normalized form used by graph
//! convolutions: with `A` the undirected binary adjacency (edge directions
//! dropped, parallel edges collapsed) and `Ã = A + I`,
//! `Â = D̃^{-1/2} Ã D̃^{-1/2}` where `D̃` is the diagonal degree matrix of
//! `Ã`. An isolated node thus gets the single entry `Â[i][i] = 1`.

use crate::dfg::{Dfg, NodeKind, Violation};
use crate::scalar::Scalar;
use ndarray::{Array2, ArrayView2};
use std::collections::BTreeSet;

/// Width of one node feature row.
pub const NODE_FEATURE_DIM: usize = 10;

/// Encodes one node as its 10-dim feature row.
pub fn encode_node<T: Scalar>(kind: NodeKind, bitwidth: u8, lut_pragma: bool) -> [T; NODE_FEATURE_DIM] {
    let mut row = [T::zero(); NODE_FEATURE_DIM];
    row[kind.one_hot_index()] = T::one();
    if kind.is_op() {
        let code = bitwidth - 1; // 1..=31, fits in 5 bits
        for bit in 0..5 {
            if (code >> (4 - bit)) & 1 == 1 {
                row[4 + bit] = T::one();
            }
        }
    }
    if lut_pragma {
        row[9] = T::one();
    }
    row
}

/// `n x 10` feature matrix for a graph, rows in node-id order.
pub fn node_features<T: Scalar>(dfg: &Dfg) -> Array2<T> {
    let n = dfg.node_count();
    let mut features = Array2::zeros((n, NODE_FEATURE_DIM));
    for node in dfg.nodes() {
        let row = encode_node::<T>(node.kind, node.bitwidth, node.lut_pragma);
        for (j, v) in row.into_iter().enumerate() {
            features[[node.id, j]] = v;
        }
    }
    features
}

/// Undirected neighbor sets (directions dropped, parallel edges collapsed,
/// self-loops ignored — the normalization adds its own).
fn neighbor_sets(dfg: &Dfg) -> Vec<BTreeSet<usize>> {
    let n = dfg.node_count();
    let mut neigh = vec![BTreeSet::new(); n];
    for &(src, dst) in dfg.edges() {
        if src < n && dst < n && src != dst {
            neigh[src].insert(dst);
            neigh[dst].insert(src);
        }
    }
    neigh
}

/// Dense symmetrically normalized adjacency `Â` (see module docs).
pub fn normalized_adjacency<T: Scalar>(dfg: &Dfg) -> Array2<T> {
    let n = dfg.node_count();
    let neigh = neighbor_sets(dfg);
    let inv_sqrt_deg: Vec<T> = (0..n)
        .map(|i| T::one() / T::of_usize(neigh[i].len() + 1).sqrt())
        .collect();
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        adj[[i, i]] = inv_sqrt_deg[i] * inv_sqrt_deg[i];
        for &j in &neigh[i] {
            adj[[i, j]] = inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    adj
}

/// Sparse form of the normalized adjacency, stored as sorted COO triples.
/// The matrix is symmetric, and graphs here have roughly 2 edges per node,
/// so sparse products cut the GCN propagation cost from `O(n^2 d)` to
/// `O(nnz d)`.
#[derive(Clone, Debug)]
pub struct SparseAdj<T> {
    n: usize,
    entries: Vec<(u32, u32, T)>,
}

impl<T: Scalar> SparseAdj<T> {
    pub fn from_dfg(dfg: &Dfg) -> Self {
        let n = dfg.node_count();
        let neigh = neighbor_sets(dfg);
        let inv_sqrt_deg: Vec<T> = (0..n)
            .map(|i| T::one() / T::of_usize(neigh[i].len() + 1).sqrt())
            .collect();
        let mut entries = Vec::new();
        for i in 0..n {
            // Row-major sorted: self-entry interleaved with neighbors.
            let mut cols: Vec<usize> = neigh[i].iter().copied().collect();
            cols.push(i);
            cols.sort_unstable();
            for j in cols {
                entries.push((i as u32, j as u32, inv_sqrt_deg[i] * inv_sqrt_deg[j]));
            }
        }
        SparseAdj { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Â * rhs` for an `n x d` right-hand side.
    pub fn matmul(&self, rhs: &ArrayView2<T>) -> Array2<T> {
        assert_eq!(rhs.nrows(), self.n, "rhs row count must match node count");
        let d = rhs.ncols();
        let mut out = Array2::zeros((self.n, d));
        for &(i, j, v) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            for k in 0..d {
                out[[i, k]] += v * rhs[[j, k]];
            }
        }
        out
    }

    /// Dense copy, mainly for tests.
    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n, self.n));
        for &(i, j, v) in &self.entries {
            out[[i as usize, j as usize]] = v;
        }
        out
    }
}

/// Feature matrix plus normalized adjacency, validated on construction.
#[derive(Clone, Debug)]
pub struct GraphTensors<T> {
    features: Array2<T>,
    adj: SparseAdj<T>,
}

impl<T: Scalar> GraphTensors<T> {
    /// Builds tensors for a graph, first checking the IR invariants.
    pub fn new(dfg: &Dfg) -> Result<Self, Vec<Violation>> {
        let violations = dfg.validate();
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(GraphTensors {
            features: node_features(dfg),
            adj: SparseAdj::from_dfg(dfg),
        })
    }

    pub fn node_count(&self) -> usize {
        self.adj.n()
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn adj(&self) -> &SparseAdj<T> {
        &self.adj
    }

    /// Rewrites the directive column (dim 9) for the given node.
    pub fn set_pragma_flag(&mut self, node: usize, flag: bool) {
        self.features[[node, 9]] = if flag { T::one() } else { T::zero() };
    }

    /// Clears the directive column for all nodes.
    pub fn clear_pragma_flags(&mut self) {
        self.features.column_mut(9).fill(T::zero());
    }
}
