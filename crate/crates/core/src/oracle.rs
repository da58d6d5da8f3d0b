//! Deterministic analytic cost model ("the oracle").
//!
//! Plays the role a vendor synthesis flow would play at full scale: it maps
//! a valid graph to LUT count, DSP count, and a critical-path estimate in
//! nanoseconds. The model is intentionally simple, closed-form, and exactly
//! reproducible, which makes it usable both as a label generator for the
//! learned predictor and as ground truth for scoring search results.
//!
//! Per-node contributions:
//! - add (width `b`): `b` LUTs, 0 DSPs, delay `0.5 + 0.02 b` ns,
//! - mul without directive: `2 b` LUTs and a width-tiered DSP count
//!   (1 for `b <= 18`, 2 for `19..=25`, 4 for `26..=32`),
//!   delay `2.0 + 0.01 b` ns,
//! - mul with the LUT directive: `b^2` LUTs, 0 DSPs, delay `1.0 + 0.05 b` ns.
//!
//! Totals: LUT adds a fixed overhead of 10 per operation node; the critical
//! path is the largest single-node delay plus a routing-congestion term
//! `0.3 * log2(1 + k)` where `k` is the number of directive-flagged muls
//! (graphs with no operation nodes report 0 ns). Latency counts operation
//! nodes on the longest path and is independent of directives.

use crate::dfg::{Dfg, NodeKind, Violation};
use crate::scalar::Scalar;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use thiserror::Error;

/// LUT/DSP/critical-path triple reported by the oracle.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CostTriple<T> {
    pub lut: u64,
    pub dsp: u64,
    pub cp_ns: T,
}

#[derive(Debug, Error)]
#[error("cannot cost an invalid graph: {violations:?}")]
pub struct OracleError {
    pub violations: Vec<Violation>,
}

/// DSP blocks consumed by one non-directive multiplier of width `b`.
pub fn mul_dsp_cost(bitwidth: u8) -> u64 {
    match bitwidth {
        0..=18 => 1,
        19..=25 => 2,
        _ => 4,
    }
}

/// Fixed LUT overhead charged per operation node.
pub const LUT_OVERHEAD_PER_OP: u64 = 10;

/// Congestion coefficient on `log2(1 + flagged_muls)` in the critical path.
pub const CONGESTION_COEFF: f64 = 0.3;

fn node_delay<T: Scalar>(kind: NodeKind, bitwidth: u8, lut_pragma: bool) -> T {
    let b = T::of(f64::from(bitwidth));
    match kind {
        NodeKind::Add => T::of(0.5) + T::of(0.02) * b,
        NodeKind::Mul if lut_pragma => T::one() + T::of(0.05) * b,
        NodeKind::Mul => T::of(2.0) + T::of(0.01) * b,
        NodeKind::Input | NodeKind::Output => T::zero(),
    }
}

/// Costs a valid graph. Invalid graphs produce an error carrying the full
/// violation list.
pub fn evaluate<T: Scalar>(dfg: &Dfg) -> Result<CostTriple<T>, OracleError> {
    let violations = dfg.validate();
    if !violations.is_empty() {
        return Err(OracleError { violations });
    }
    Ok(evaluate_unchecked(dfg))
}

/// Costs a graph without re-validating. The caller must hold a valid graph
/// (e.g. one that already passed [`GraphTensors`](crate::features::GraphTensors)
/// construction); on invalid input the result is meaningless but the call
/// does not panic.
pub fn evaluate_unchecked<T: Scalar>(dfg: &Dfg) -> CostTriple<T> {
    let mut lut = 0u64;
    let mut dsp = 0u64;
    let mut max_delay = T::zero();
    let mut flagged = 0u64;
    let mut ops = 0u64;

    for node in dfg.nodes() {
        let b = u64::from(node.bitwidth);
        match node.kind {
            NodeKind::Add => {
                ops += 1;
                lut += b;
            }
            NodeKind::Mul if node.lut_pragma => {
                ops += 1;
                flagged += 1;
                lut += b * b;
            }
            NodeKind::Mul => {
                ops += 1;
                lut += 2 * b;
                dsp += mul_dsp_cost(node.bitwidth);
            }
            NodeKind::Input | NodeKind::Output => {}
        }
        let delay = node_delay::<T>(node.kind, node.bitwidth, node.lut_pragma);
        if delay > max_delay {
            max_delay = delay;
        }
    }

    lut += LUT_OVERHEAD_PER_OP * ops;
    let cp_ns = if ops == 0 {
        T::zero()
    } else {
        max_delay + T::of(CONGESTION_COEFF) * T::of(1.0 + flagged as f64).log2()
    };
    CostTriple { lut, dsp, cp_ns }
}

/// Operation-node count along the longest path (directive-independent).
/// Inputs and outputs contribute no levels. Panics if the graph is cyclic;
/// validate first.
pub fn latency(dfg: &Dfg) -> u32 {
    let order = dfg
        .topo_order()
        .expect("latency requires an acyclic graph; run validate() first");
    let preds = dfg.preds();
    let mut depth = vec![0u32; dfg.node_count()];
    let mut max_depth = 0u32;
    for id in order {
        let input_depth = preds[id].iter().map(|&p| depth[p]).max().unwrap_or(0);
        let own = u32::from(dfg.node(id).kind.is_op());
        depth[id] = input_depth + own;
        max_depth = max_depth.max(depth[id]);
    }
    max_depth
}

/// Optional multiplicative perturbation for robustness studies; off unless
/// explicitly requested.
#[derive(Copy, Clone, Debug)]
pub struct NoiseConfig {
    /// Relative amplitude, e.g. 0.05 for +/-5%.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            amplitude: 0.05,
            seed: 0,
        }
    }
}

/// Costs a graph, optionally perturbing each component by an independent
/// uniform factor in `[1 - amplitude, 1 + amplitude]`. The perturbation is
/// a pure function of `(noise.seed, graph bytes)`, so repeated calls on the
/// same graph agree. LUT/DSP are rounded back to integers; a zero stays
/// zero under any multiplicative factor.
pub fn evaluate_with_noise<T: Scalar>(
    dfg: &Dfg,
    noise: Option<&NoiseConfig>,
) -> Result<CostTriple<T>, OracleError> {
    let base = evaluate::<T>(dfg)?;
    let Some(noise) = noise else {
        return Ok(base);
    };
    let mut hasher = DefaultHasher::new();
    noise.seed.hash(&mut hasher);
    dfg.to_json_string().hash(&mut hasher);
    let mut rng = ChaCha8Rng::seed_from_u64(hasher.finish());
    let factor = |rng: &mut ChaCha8Rng| 1.0 + noise.amplitude * (2.0 * rng.gen::<f64>() - 1.0);
    let lut = (base.lut as f64 * factor(&mut rng)).round() as u64;
    let dsp = (base.dsp as f64 * factor(&mut rng)).round() as u64;
    let cp_ns = base.cp_ns * T::of(factor(&mut rng));
    Ok(CostTriple { lut, dsp, cp_ns })
}
