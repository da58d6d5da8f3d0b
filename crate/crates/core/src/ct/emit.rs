//! Emits kernel source from a graph — the inverse of parse + lower.
//!
//! Node `k` becomes the identifier `vk`. Input and output declarations use
//! `int32` (I/O nodes carry no width of their own); each op node becomes a
//! `var` at the node's width plus one assignment statement, with a
//! `Mul_LUT` directive line in front of every flagged multiplier.
//! Statements are ordered by a deterministic topological sort, so the text
//! always parses and lowers back to a graph isomorphic to the original —
//! provided every node of the original reaches an output (re-lowering
//! prunes dead values) and every input has a consumer (re-lowering creates
//! inputs on first use).

use crate::dfg::{Dfg, NodeKind};
use std::fmt::Write as _;

/// Renders a graph as kernel source.
///
/// # Panics
///
/// Panics if the graph is cyclic or an op node's in-degree is not 2; run
/// [`Dfg::validate`] first when the graph comes from untrusted input.
pub fn emit_code(dfg: &Dfg) -> String {
    let order = dfg.topo_order().expect("emit requires an acyclic graph");
    let preds = dfg.preds();
    let mut src = String::new();

    for node in dfg.nodes() {
        match node.kind {
            NodeKind::Input => writeln!(src, "in v{}:int32;", node.id).unwrap(),
            NodeKind::Add | NodeKind::Mul => {
                writeln!(src, "var v{}:int{};", node.id, node.bitwidth).unwrap()
            }
            NodeKind::Output => writeln!(src, "out v{}:int32;", node.id).unwrap(),
        }
    }

    for id in order {
        let node = dfg.node(id);
        match node.kind {
            NodeKind::Input => {}
            NodeKind::Add | NodeKind::Mul => {
                let p = &preds[id];
                assert_eq!(p.len(), 2, "op node v{id} must have exactly two operands");
                if node.lut_pragma {
                    writeln!(src, "#pragma HLS resource variable=v{id} core=Mul_LUT").unwrap();
                }
                let op = if node.kind == NodeKind::Add { '+' } else { '*' };
                writeln!(src, "v{id} = v{} {op} v{};", p[0], p[1]).unwrap();
            }
            NodeKind::Output => {
                writeln!(src, "v{id} = v{};", preds[id][0]).unwrap();
            }
        }
    }
    src
}

#[cfg(test)]
mod tests {
    use super::super::lower::{lower, InputSource, Lowered};
    use super::super::parser::parse;
    use super::*;
    use crate::datagen::{generate_topology, TopologyConfig};

    fn round_trip(dfg: &Dfg) -> Lowered {
        let src = emit_code(dfg);
        lower(&parse(&src).unwrap_or_else(|e| panic!("emitted source failed to parse: {e}\n{src}")))
            .unwrap_or_else(|e| panic!("emitted source failed to lower: {e}\n{src}"))
    }

    /// Checks that `rt` is isomorphic to `dfg` using the emitted `vK` names
    /// to pin down the node bijection exactly.
    fn assert_isomorphic(dfg: &Dfg, rt: &Lowered) {
        let out = &rt.dfg;
        assert_eq!(out.node_count(), dfg.node_count());

        let mut map = vec![usize::MAX; dfg.node_count()];
        for b in &rt.inputs {
            let InputSource::Scalar(name) = &b.source else {
                panic!("emitted inputs are plain scalars, got {:?}", b.source);
            };
            map[name[1..].parse::<usize>().unwrap()] = b.node;
        }
        for b in &rt.outputs {
            map[b.sink.key()[1..].parse::<usize>().unwrap()] = b.node;
        }
        // Op statements appear in the source's topo order, and re-lowered op
        // ids ascend in statement order, giving the op-to-op correspondence.
        let src_ops: Vec<usize> = dfg
            .topo_order()
            .unwrap()
            .into_iter()
            .filter(|&i| dfg.node(i).kind.is_op())
            .collect();
        let rt_ops: Vec<usize> = out
            .nodes()
            .iter()
            .filter(|n| n.kind.is_op())
            .map(|n| n.id)
            .collect();
        assert_eq!(src_ops.len(), rt_ops.len());
        for (&s, &r) in src_ops.iter().zip(&rt_ops) {
            map[s] = r;
        }

        for n in dfg.nodes() {
            let m = out.node(map[n.id]);
            assert_eq!(
                (n.kind, n.bitwidth, n.lut_pragma),
                (m.kind, m.bitwidth, m.lut_pragma),
                "attrs differ at source node {}",
                n.id
            );
        }
        let mut mapped: Vec<(usize, usize)> =
            dfg.edges().iter().map(|&(s, d)| (map[s], map[d])).collect();
        let mut actual: Vec<(usize, usize)> = out.edges().to_vec();
        mapped.sort_unstable();
        actual.sort_unstable();
        assert_eq!(mapped, actual);
    }

    #[test]
    fn emits_expected_text_for_flagged_multiply() {
        let src = "\
in a:int8;
in b:int8;
out y:int8;
#pragma HLS resource variable=y core=Mul_LUT
y = a * b;
";
        let l = lower(&parse(src).unwrap()).unwrap();
        let expected = "\
in v0:int32;
in v1:int32;
var v2:int8;
out v3:int32;
#pragma HLS resource variable=v2 core=Mul_LUT
v2 = v0 * v1;
v3 = v2;
";
        assert_eq!(emit_code(&l.dfg), expected);
    }

    #[test]
    fn kernel_graphs_round_trip_isomorphically() {
        let sources = [
            "in a:int8[8];\nin b:int8[8];\nout sum:int8;\nfor i in 0..8 {\n  sum += a[i] * b[i];\n}\n",
            "in a:int16;\nvar t:int12;\nout y:int6;\nt = a*a + a;\ny = t + t + 3;\n",
            "in a:int8[2];\nout c:int8[2];\nfor i in 0..2 {\n  #pragma HLS resource variable=c core=Mul_LUT\n  c[i] = a[i] * a[i];\n}\n",
        ];
        for src in sources {
            let l = lower(&parse(src).unwrap()).unwrap();
            assert_isomorphic(&l.dfg, &round_trip(&l.dfg));
        }
    }

    #[test]
    fn generated_graphs_round_trip_with_pragmas() {
        for seed in 0..8u64 {
            let dfg = generate_topology(seed, &TopologyConfig::default());
            // Flag an arbitrary but deterministic subset of multipliers.
            let assignment: Vec<bool> =
                (0..dfg.mul_count()).map(|i| (i + seed as usize) % 3 == 0).collect();
            let dfg = dfg.with_assignment(&assignment).unwrap();
            let rt = round_trip(&dfg);
            assert_isomorphic(&dfg, &rt);
            assert_eq!(rt.dfg.assignment(), assignment);
        }
    }

    #[test]
    fn emit_is_stable_across_a_round_trip() {
        let src = "in a:int8[4];\nout y:int8;\nfor i in 0..4 {\n  y += a[i] * a[i];\n}\n";
        let l = lower(&parse(src).unwrap()).unwrap();
        let first = emit_code(&l.dfg);
        let second = emit_code(&round_trip(&l.dfg).dfg);
        assert_eq!(first, second);
    }
}
