//! The directive-assignment decision process.
//!
//! An episode walks the topology's multipliers in id order; at step `t` the
//! agent decides whether multiplier `t` gets the LUT directive. The state
//! the agent sees is the learned predictor's combined graph embedding for
//! the partially flagged graph, plus a handful of scalars locating the
//! episode: normalized step index, node-kind counts, the number of flags
//! placed so far, and the DSP target.

use crate::dfg::{Dfg, NodeKind, Violation};
use crate::features::GraphTensors;
use crate::gpp::{GppModel, COMBINED_EMBED_DIM};
use crate::scalar::Scalar;
use ndarray::Array2;

/// Dimension of the agent's state vector: the `1 x 192` combined embedding
/// followed by 7 scalars (step fraction, four kind counts, flags so far,
/// DSP target).
pub const STATE_DIM: usize = COMBINED_EMBED_DIM + 7;

/// Node-kind counts and the flagged count are divided by this before they
/// enter the state, keeping desk-scale graphs inside the unit box.
pub const COUNT_SCALE: f64 = 256.0;

/// DSP targets are divided by this before they enter the state.
pub const TARGET_SCALE: f64 = 64.0;

/// One in-progress assignment episode over a fixed topology.
pub struct DseEnv<'a, T: Scalar> {
    gpp: &'a GppModel<T>,
    tensors: GraphTensors<T>,
    mul_ids: Vec<usize>,
    dsp_target: u32,
    kind_counts: [usize; 4],
    assignment: Vec<bool>,
}

impl<'a, T: Scalar> DseEnv<'a, T> {
    /// Binds to a topology (validating it) with all directives cleared,
    /// regardless of any flags the graph carried.
    pub fn new(gpp: &'a GppModel<T>, dfg: &Dfg, dsp_target: u32) -> Result<Self, Vec<Violation>> {
        let mut tensors = GraphTensors::new(dfg)?;
        tensors.clear_pragma_flags();
        let kind_counts = [
            dfg.count_kind(NodeKind::Input),
            dfg.count_kind(NodeKind::Add),
            dfg.count_kind(NodeKind::Mul),
            dfg.count_kind(NodeKind::Output),
        ];
        Ok(DseEnv {
            gpp,
            tensors,
            mul_ids: dfg.mul_ids(),
            dsp_target,
            kind_counts,
            assignment: Vec::new(),
        })
    }

    /// Clears all placed directives and restarts the episode.
    pub fn reset(&mut self) {
        self.tensors.clear_pragma_flags();
        self.assignment.clear();
    }

    /// Decisions already made this episode.
    pub fn step(&self) -> usize {
        self.assignment.len()
    }

    /// Total decisions in an episode (= multiplier count).
    pub fn total_steps(&self) -> usize {
        self.mul_ids.len()
    }

    pub fn done(&self) -> bool {
        self.assignment.len() == self.mul_ids.len()
    }

    pub fn dsp_target(&self) -> u32 {
        self.dsp_target
    }

    /// Flags placed so far, in multiplier id order.
    pub fn assignment(&self) -> &[bool] {
        &self.assignment
    }

    /// Tensors reflecting the directives placed so far.
    pub fn tensors(&self) -> &GraphTensors<T> {
        &self.tensors
    }

    /// Applies the decision for the current multiplier.
    ///
    /// # Panics
    ///
    /// Panics if the episode is already complete.
    pub fn apply(&mut self, flag: bool) {
        let t = self.assignment.len();
        assert!(t < self.mul_ids.len(), "episode is already complete");
        self.tensors.set_pragma_flag(self.mul_ids[t], flag);
        self.assignment.push(flag);
    }

    /// The agent's view of the current position: `1 x STATE_DIM`.
    pub fn state(&self) -> Array2<T> {
        let emb = self.gpp.combined_embedding(&self.tensors);
        let mut state = Array2::zeros((1, STATE_DIM));
        for (j, &v) in emb.row(0).iter().enumerate() {
            state[[0, j]] = v;
        }
        let total = self.total_steps().max(1);
        let flagged = self.assignment.iter().filter(|&&b| b).count();
        let scalars = [
            T::of_usize(self.step()) / T::of_usize(total),
            T::of_usize(self.kind_counts[0]) / T::of(COUNT_SCALE),
            T::of_usize(self.kind_counts[1]) / T::of(COUNT_SCALE),
            T::of_usize(self.kind_counts[2]) / T::of(COUNT_SCALE),
            T::of_usize(self.kind_counts[3]) / T::of(COUNT_SCALE),
            T::of_usize(flagged) / T::of(COUNT_SCALE),
            T::of(f64::from(self.dsp_target)) / T::of(TARGET_SCALE),
        ];
        for (j, v) in scalars.into_iter().enumerate() {
            state[[0, COMBINED_EMBED_DIM + j]] = v;
        }
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_topology, TopologyConfig};
    use crate::gpp::ScaleByNodes;

    fn fixture() -> (GppModel<f64>, Dfg) {
        let dfg = generate_topology(
            4,
            &TopologyConfig {
                ops_range: (10, 14),
                inputs_range: (3, 5),
                ..TopologyConfig::default()
            },
        );
        (GppModel::new(1, ScaleByNodes::default()), dfg)
    }

    #[test]
    fn state_dimension_and_scalar_block() {
        let (gpp, dfg) = fixture();
        let env = DseEnv::new(&gpp, &dfg, 4).unwrap();
        let s = env.state();
        assert_eq!(s.shape(), &[1, 199]);
        assert_eq!(s[[0, 192]], 0.0, "no decisions yet");
        assert_eq!(
            s[[0, 193]],
            dfg.count_kind(NodeKind::Input) as f64 / 256.0
        );
        assert_eq!(s[[0, 197]], 0.0, "nothing flagged yet");
        assert_eq!(s[[0, 198]], 4.0 / 64.0);
    }

    #[test]
    fn stepping_updates_embedding_and_scalars() {
        let (gpp, dfg) = fixture();
        let mut env = DseEnv::new(&gpp, &dfg, 4).unwrap();
        let before = env.state();
        env.apply(true);
        let after = env.state();
        assert_ne!(
            before.slice(ndarray::s![0, ..192]),
            after.slice(ndarray::s![0, ..192]),
            "flagging a multiplier must move the embedding"
        );
        assert_eq!(after[[0, 192]], 1.0 / env.total_steps() as f64);
        assert_eq!(after[[0, 197]], 1.0 / 256.0);

        env.apply(false);
        assert_eq!(env.assignment(), &[true, false]);
    }

    #[test]
    fn episodes_replay_identically_after_reset() {
        let (gpp, dfg) = fixture();
        let mut env = DseEnv::new(&gpp, &dfg, 6).unwrap();
        let s0 = env.state();
        while !env.done() {
            env.apply(env.step() % 2 == 0);
        }
        let full = env.assignment().to_vec();
        env.reset();
        assert_eq!(env.state(), s0, "reset must clear every directive");
        assert_eq!(env.step(), 0);
        while !env.done() {
            env.apply(env.step() % 2 == 0);
        }
        assert_eq!(env.assignment(), full);
    }

    #[test]
    fn preexisting_flags_are_cleared_on_bind() {
        let (gpp, dfg) = fixture();
        let flagged = dfg
            .with_assignment(&vec![true; dfg.mul_count()])
            .unwrap();
        let env_flagged = DseEnv::new(&gpp, &flagged, 6).unwrap();
        let env_clean = DseEnv::new(&gpp, &dfg, 6).unwrap();
        assert_eq!(env_flagged.state(), env_clean.state());
    }
}
