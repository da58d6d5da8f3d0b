//! Reinforcement-learning design-space explorer.
//!
//! The agent walks a topology's multipliers in id order and decides, one at
//! a time, which get the LUT-mapping directive. States come from the
//! learned predictor's graph embedding ([`env`]), the policy/value network
//! is a small shared-trunk actor-critic ([`agent`]), and training is
//! Monte-Carlo advantage updates from complete episodes ([`train`]):
//! pretraining scores designs with the learned predictor across many
//! topologies, fine-tuning re-scores one topology with the exact evaluator
//! under a call budget.

pub mod agent;
pub mod env;
pub mod train;

pub use agent::{ActorCritic, AgentForward, N_ACTIONS, TRUNK1_DIM, TRUNK2_DIM};
pub use env::{DseEnv, COUNT_SCALE, STATE_DIM, TARGET_SCALE};
pub use train::{
    discounted_deltas, fine_tune, infer_assignment, train_rlmd, update_from_episode, Episode,
    EpisodeStats, FineTuneConfig, FineTuneResult, IncompleteEpisode, RlStepError, RlTrainConfig,
    RlTrainError, UpdateStats,
};
