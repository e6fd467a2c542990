//! DDPG agents and the two multi-agent trainers.
//!
//! Both algorithms share the replay buffer, exploration schedule, input
//! normalization and critic regression. They differ only in what the critic
//! sees: I-DDPG critics take `(o_i, a_i)`, CTDE critics take every agent's
//! observation and action.

mod agent;
mod buffer;
mod config;
mod normalizer;
mod trainer;

pub use agent::{
    actor_gradient_centralized, actor_gradient_decentralized, critic_td_target, select_action, CriticMode,
    DdpgAgent, NetBundle,
};
pub use buffer::{JointTransition, Minibatch, ReplayBuffer};
pub use config::{ActorProfile, Algorithm, NoiseSchedule, TrainConfig};
pub use normalizer::Normalizer;
pub use trainer::{evaluate, evaluate_with, train, EvalReport, TrainRun, Trainer};
