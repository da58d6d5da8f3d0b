//! The actor-critic network: a shared two-layer trunk over the state
//! vector, a two-way softmax policy head (flag / don't flag), and a linear
//! value head. Forward and backward passes are written out by hand and
//! verified against finite differences in the tests.

use super::env::STATE_DIM;
use crate::io::{read_tensors, take_tensors, write_tensors, CheckpointError};
use crate::nn::{leaky_relu, leaky_relu_deriv, subseed, Layer};
use crate::scalar::Scalar;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub const TRUNK1_DIM: usize = 256;
pub const TRUNK2_DIM: usize = 128;
/// Policy actions: index 0 leaves the multiplier alone, 1 flags it.
pub const N_ACTIONS: usize = 2;

const CHECKPOINT_MAGIC: &str = "RLMDv1";
const N_TENSORS: usize = 8;

/// Everything the backward pass needs from a forward evaluation, plus the
/// outputs themselves.
#[derive(Clone, Debug)]
pub struct AgentForward<T> {
    z1: Array2<T>,
    h1: Array2<T>,
    z2: Array2<T>,
    h2: Array2<T>,
    /// Action distribution, sums to one.
    pub probs: [T; N_ACTIONS],
    /// Log of the action distribution, computed as logit minus
    /// log-sum-exp. Stays finite even when the policy saturates so hard
    /// that the losing probability underflows to zero (its log would be
    /// `-inf`), which hundreds of single-task fine-tuning episodes can
    /// reach.
    pub log_probs: [T; N_ACTIONS],
    /// State-value estimate.
    pub value: T,
}

/// Two-layer leaky-ReLU trunk with softmax policy and linear value heads.
#[derive(Clone, Debug)]
pub struct ActorCritic<T> {
    pub trunk1: Layer<T>,
    pub trunk2: Layer<T>,
    pub actor: Layer<T>,
    pub critic: Layer<T>,
}

impl<T: Scalar> ActorCritic<T> {
    /// Glorot-initialized network; layers draw from one seeded stream.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 10));
        ActorCritic {
            trunk1: Layer::glorot(STATE_DIM, TRUNK1_DIM, &mut rng),
            trunk2: Layer::glorot(TRUNK1_DIM, TRUNK2_DIM, &mut rng),
            actor: Layer::glorot(TRUNK2_DIM, N_ACTIONS, &mut rng),
            critic: Layer::glorot(TRUNK2_DIM, 1, &mut rng),
        }
    }

    /// Forward pass for one `1 x STATE_DIM` state.
    pub fn forward(&self, state: &Array2<T>) -> AgentForward<T> {
        assert_eq!(state.shape(), &[1, STATE_DIM], "state shape");
        let z1 = self.trunk1.affine(state);
        let h1 = z1.mapv(leaky_relu);
        let z2 = self.trunk2.affine(&h1);
        let h2 = z2.mapv(leaky_relu);

        let logits = self.actor.affine(&h2);
        let m = if logits[[0, 0]] > logits[[0, 1]] {
            logits[[0, 0]]
        } else {
            logits[[0, 1]]
        };
        let e0 = (logits[[0, 0]] - m).exp();
        let e1 = (logits[[0, 1]] - m).exp();
        let z = e0 + e1;
        let probs = [e0 / z, e1 / z];
        let log_z = z.ln();
        let log_probs = [
            logits[[0, 0]] - m - log_z,
            logits[[0, 1]] - m - log_z,
        ];

        let value = self.critic.affine(&h2)[[0, 0]];
        AgentForward {
            z1,
            h1,
            z2,
            h2,
            probs,
            log_probs,
            value,
        }
    }

    /// Greedy action for a state: the argmax of the policy, preferring
    /// "don't flag" on an exact tie.
    pub fn greedy_action(&self, state: &Array2<T>) -> bool {
        let fwd = self.forward(state);
        fwd.probs[1] > fwd.probs[0]
    }

    /// Backpropagates the pair of head gradients `d_logits` (at the actor's
    /// pre-softmax logits) and `d_value` (at the critic output) for the
    /// state that produced `fwd`. Returns gradients in [`param_names`]
    /// order.
    ///
    /// [`param_names`]: ActorCritic::param_names
    pub fn backward(
        &self,
        state: &Array2<T>,
        fwd: &AgentForward<T>,
        d_logits: [T; N_ACTIONS],
        d_value: T,
    ) -> Vec<Array2<T>> {
        let d_logits = Array2::from_shape_vec((1, N_ACTIONS), d_logits.to_vec())
            .expect("2-entry row");
        let d_val = Array2::from_shape_vec((1, 1), vec![d_value]).expect("1-entry row");

        let d_actor_w = fwd.h2.t().dot(&d_logits);
        let d_actor_b = d_logits.clone();
        let d_critic_w = fwd.h2.t().dot(&d_val);
        let d_critic_b = d_val.clone();

        let d_h2 = d_logits.dot(&self.actor.w.t()) + d_val.dot(&self.critic.w.t());
        let d_z2 = &d_h2 * &fwd.z2.mapv(leaky_relu_deriv);
        let d_trunk2_w = fwd.h1.t().dot(&d_z2);
        let d_trunk2_b = d_z2.clone();

        let d_h1 = d_z2.dot(&self.trunk2.w.t());
        let d_z1 = &d_h1 * &fwd.z1.mapv(leaky_relu_deriv);
        let d_trunk1_w = state.t().dot(&d_z1);
        let d_trunk1_b = d_z1;

        vec![
            d_trunk1_w,
            d_trunk1_b,
            d_trunk2_w,
            d_trunk2_b,
            d_actor_w,
            d_actor_b,
            d_critic_w,
            d_critic_b,
        ]
    }

    pub fn param_names() -> [&'static str; N_TENSORS] {
        [
            "trunk1.w", "trunk1.b", "trunk2.w", "trunk2.b", "actor.w", "actor.b", "critic.w",
            "critic.b",
        ]
    }

    pub fn params(&self) -> [&Array2<T>; N_TENSORS] {
        [
            &self.trunk1.w,
            &self.trunk1.b,
            &self.trunk2.w,
            &self.trunk2.b,
            &self.actor.w,
            &self.actor.b,
            &self.critic.w,
            &self.critic.b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Array2<T>; N_TENSORS] {
        [
            &mut self.trunk1.w,
            &mut self.trunk1.b,
            &mut self.trunk2.w,
            &mut self.trunk2.b,
            &mut self.actor.w,
            &mut self.actor.b,
            &mut self.critic.w,
            &mut self.critic.b,
        ]
    }

    fn tensor_schema() -> [(&'static str, usize, usize); N_TENSORS] {
        [
            ("trunk1.w", STATE_DIM, TRUNK1_DIM),
            ("trunk1.b", 1, TRUNK1_DIM),
            ("trunk2.w", TRUNK1_DIM, TRUNK2_DIM),
            ("trunk2.b", 1, TRUNK2_DIM),
            ("actor.w", TRUNK2_DIM, N_ACTIONS),
            ("actor.b", 1, N_ACTIONS),
            ("critic.w", TRUNK2_DIM, 1),
            ("critic.b", 1, 1),
        ]
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let meta = serde_json::json!({ "state_dim": STATE_DIM });
        let named: Vec<(&str, &Array2<T>)> = Self::param_names()
            .into_iter()
            .zip(self.params())
            .collect();
        write_tensors(path, CHECKPOINT_MAGIC, &meta, &named)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let (_meta, tensors) = read_tensors::<T>(path, CHECKPOINT_MAGIC)?;
        let schema = Self::tensor_schema();
        let schema_refs: Vec<(&str, usize, usize)> =
            schema.iter().map(|&(n, r, c)| (n, r, c)).collect();
        let mut arrays = take_tensors(path, tensors, &schema_refs)?.into_iter();
        let mut next = || {
            let w = arrays.next().expect("schema length checked");
            let b = arrays.next().expect("schema length checked");
            Layer { w, b }
        };
        Ok(ActorCritic {
            trunk1: next(),
            trunk2: next(),
            actor: next(),
            critic: next(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{numeric_gradient_sampled, sampled_distance};
    use rand::Rng;

    fn random_state(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((1, STATE_DIM), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn probabilities_are_a_distribution() {
        let net = ActorCritic::<f64>::new(0);
        let fwd = net.forward(&random_state(1));
        assert!((fwd.probs[0] + fwd.probs[1] - 1.0).abs() < 1e-12);
        assert!(fwd.probs[0] > 0.0 && fwd.probs[1] > 0.0);
        assert!(fwd.value.is_finite());
    }

    #[test]
    fn construction_is_seeded() {
        let a = ActorCritic::<f64>::new(7);
        let b = ActorCritic::<f64>::new(7);
        for (x, y) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(x, y);
        }
        let c = ActorCritic::<f64>::new(8);
        assert_ne!(a.trunk1.w, c.trunk1.w);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss: -delta * (V + log pi_a), the per-step term of the training
        // objective, with a fixed action and advantage.
        let state = random_state(3);
        let delta = -0.7_f64;
        let action = 1usize;

        let loss_of = |net: &ActorCritic<f64>| {
            let fwd = net.forward(&state);
            -delta * (fwd.value + fwd.log_probs[action])
        };

        let net = ActorCritic::<f64>::new(5);
        let fwd = net.forward(&state);
        // d/dlogit_j of -delta*log pi_a = -delta * (1{j=a} - pi_j);
        // d/dV of -delta*V = -delta.
        let mut d_logits = [delta * fwd.probs[0], delta * fwd.probs[1]];
        d_logits[action] -= delta;
        let grads = net.backward(&state, &fwd, d_logits, -delta);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (t_idx, name) in ActorCritic::<f64>::param_names().iter().enumerate() {
            let analytic = &grads[t_idx];
            let mut probe = net.params()[t_idx].clone();
            let len = probe.len();
            let n_coords = len.min(30);
            let coords: Vec<usize> =
                (0..n_coords).map(|_| rng.gen_range(0..len)).collect();
            let numeric = numeric_gradient_sampled(&mut probe, &coords, |p| {
                let mut m = net.clone();
                m.params_mut()[t_idx].assign(p);
                loss_of(&m)
            });
            let d = sampled_distance(analytic, &numeric);
            assert!(d < 1e-6, "{name}: distance {d}");
        }
    }

    #[test]
    fn log_probs_stay_finite_when_the_policy_saturates() {
        // A logit gap of 2000 underflows the losing probability to exactly
        // zero; its log-sum-exp log-probability must still be finite.
        let mut net = ActorCritic::<f64>::new(3);
        net.actor.w.fill(0.0);
        net.actor.b[[0, 0]] = 1000.0;
        net.actor.b[[0, 1]] = -1000.0;
        let fwd = net.forward(&random_state(9));
        assert_eq!(fwd.probs[1], 0.0, "the loser underflows");
        assert!(fwd.probs[1].ln().is_infinite(), "naive log would blow up");
        assert_eq!(fwd.log_probs[1], -2000.0);
        assert_eq!(fwd.log_probs[0], 0.0);
    }

    #[test]
    fn greedy_prefers_not_flagging_on_a_tie() {
        // Zero actor weights force logits (0, 0) -> probs (0.5, 0.5).
        let mut net = ActorCritic::<f64>::new(2);
        net.actor.w.fill(0.0);
        net.actor.b.fill(0.0);
        assert!(!net.greedy_action(&random_state(4)));
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.rlmd");
        let net = ActorCritic::<f64>::new(13);
        net.save(&path).unwrap();
        let back = ActorCritic::<f64>::load(&path).unwrap();
        for (a, b) in net.params().iter().zip(back.params().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.rlmd");
        let net = ActorCritic::<f64>::new(13);
        net.save(&path).unwrap();
        let err = crate::gpp::GppModel::<f64>::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("magic") || msg.contains("RLMD") || msg.contains("GPP"), "{msg}");
    }
}
