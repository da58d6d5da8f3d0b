//! A common costing interface for search.
//!
//! Every searcher (annealing, genetic, exhaustive, the RL agent's terminal
//! reward) scores directive assignments over one fixed topology. An
//! evaluator binds to that topology up front, scores assignments on
//! demand, and counts how many times it was called so search budgets mean
//! the same thing no matter which engine is running.

use crate::dfg::{Dfg, Violation};
use crate::features::GraphTensors;
use crate::gpp::GppModel;
use crate::oracle;
use crate::reward::{terminal_reward, CostPrediction, RewardParams};
use crate::scalar::Scalar;

/// Scores directive assignments for one fixed topology.
pub trait CostEvaluator<T: Scalar> {
    /// Cost triple for the given assignment (one flag per multiplier, in
    /// multiplier id order).
    ///
    /// # Panics
    ///
    /// Panics if `assignment.len()` differs from the topology's multiplier
    /// count; searchers own the assignment length invariant.
    fn costs(&mut self, assignment: &[bool]) -> CostPrediction<T>;

    /// Scalar objective for the given assignment.
    fn reward(&mut self, assignment: &[bool], dsp_target: u32, params: &RewardParams<T>) -> T {
        let costs = self.costs(assignment);
        terminal_reward(&costs, dsp_target, params)
    }

    /// Number of multipliers in the bound topology (= assignment length).
    fn mul_count(&self) -> usize;

    /// How many times `costs` has run (each `reward` counts once).
    fn calls(&self) -> usize;

    /// Short label for reports.
    fn label(&self) -> &'static str;
}

/// Exact analytic costing.
pub struct OracleEvaluator {
    scratch: Dfg,
    calls: usize,
}

impl OracleEvaluator {
    pub fn new(dfg: &Dfg) -> Self {
        OracleEvaluator {
            scratch: dfg.clone(),
            calls: 0,
        }
    }
}

impl<T: Scalar> CostEvaluator<T> for OracleEvaluator {
    fn costs(&mut self, assignment: &[bool]) -> CostPrediction<T> {
        self.calls += 1;
        self.scratch
            .set_assignment(assignment)
            .expect("assignment length matches the bound topology");
        oracle::evaluate_unchecked::<T>(&self.scratch).into()
    }

    fn mul_count(&self) -> usize {
        self.scratch.mul_count()
    }

    fn calls(&self) -> usize {
        self.calls
    }

    fn label(&self) -> &'static str {
        "oracle"
    }
}

/// Learned-predictor costing. Binding precomputes the graph tensors once;
/// scoring only rewrites the directive feature column.
pub struct GppEvaluator<'a, T: Scalar> {
    model: &'a GppModel<T>,
    tensors: GraphTensors<T>,
    mul_ids: Vec<usize>,
    calls: usize,
}

impl<'a, T: Scalar> GppEvaluator<'a, T> {
    pub fn new(model: &'a GppModel<T>, dfg: &Dfg) -> Result<Self, Vec<Violation>> {
        Ok(GppEvaluator {
            model,
            tensors: GraphTensors::new(dfg)?,
            mul_ids: dfg.mul_ids(),
            calls: 0,
        })
    }

    fn apply(&mut self, assignment: &[bool]) {
        assert_eq!(
            assignment.len(),
            self.mul_ids.len(),
            "assignment length matches the bound topology"
        );
        for (&node, &flag) in self.mul_ids.iter().zip(assignment) {
            self.tensors.set_pragma_flag(node, flag);
        }
    }
}

impl<T: Scalar> CostEvaluator<T> for GppEvaluator<'_, T> {
    fn costs(&mut self, assignment: &[bool]) -> CostPrediction<T> {
        self.calls += 1;
        self.apply(assignment);
        self.model.predict(&self.tensors)
    }

    fn mul_count(&self) -> usize {
        self.mul_ids.len()
    }

    fn calls(&self) -> usize {
        self.calls
    }

    fn label(&self) -> &'static str {
        "gpp"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_topology, TopologyConfig};
    use crate::gpp::ScaleByNodes;

    fn small_graph() -> Dfg {
        generate_topology(
            5,
            &TopologyConfig {
                ops_range: (12, 16),
                inputs_range: (3, 5),
                ..TopologyConfig::default()
            },
        )
    }

    #[test]
    fn oracle_evaluator_matches_direct_evaluation() {
        let dfg = small_graph();
        let mut ev = OracleEvaluator::new(&dfg);
        for step in 0..4usize {
            let assignment: Vec<bool> =
                (0..dfg.mul_count()).map(|i| (i + step) % 2 == 0).collect();
            let got: CostPrediction<f64> = ev.costs(&assignment);
            let flagged = dfg.with_assignment(&assignment).unwrap();
            let want: CostPrediction<f64> = oracle::evaluate::<f64>(&flagged).unwrap().into();
            assert_eq!(got, want);
        }
        assert_eq!(ev.calls, 4);
    }

    #[test]
    fn gpp_evaluator_matches_fresh_prediction() {
        let dfg = small_graph();
        let model = GppModel::<f64>::new(9, ScaleByNodes::default());
        let mut ev = GppEvaluator::new(&model, &dfg).unwrap();
        for step in 0..3usize {
            let assignment: Vec<bool> =
                (0..dfg.mul_count()).map(|i| (i + step) % 3 == 0).collect();
            let got = ev.costs(&assignment);
            let flagged = dfg.with_assignment(&assignment).unwrap();
            let want = model.predict_dfg(&flagged).unwrap();
            assert_eq!(got, want, "column rewrite must equal a fresh encode");
        }
        assert_eq!(CostEvaluator::<f64>::calls(&ev), 3);
    }

    #[test]
    fn reward_uses_terminal_objective() {
        let dfg = small_graph();
        let mut ev = OracleEvaluator::new(&dfg);
        let assignment = vec![false; dfg.mul_count()];
        let params = RewardParams::default();
        let r: f64 = ev.reward(&assignment, 3, &params);
        let costs: CostPrediction<f64> =
            oracle::evaluate::<f64>(&dfg.with_assignment(&assignment).unwrap())
                .unwrap()
                .into();
        assert_eq!(r, terminal_reward(&costs, 3, &params));
        assert!(r <= 0.0);
    }

    #[test]
    #[should_panic(expected = "assignment length")]
    fn wrong_assignment_length_panics() {
        let dfg = small_graph();
        let mut ev = OracleEvaluator::new(&dfg);
        let _: CostPrediction<f64> = ev.costs(&vec![false; dfg.mul_count() + 1]);
    }
}
