use serde::{Deserialize, Serialize};

use crate::nn::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Independent learners, per-agent critics on `(o_i, a_i)`.
    Iddpg,
    /// Centralized critics on the joint observation and action.
    Ctde,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Iddpg => "iddpg",
            Algorithm::Ctde => "ctde",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "iddpg" => Ok(Algorithm::Iddpg),
            "ctde" | "ctdeddpg" => Ok(Algorithm::Ctde),
            other => Err(Error::Config(format!("unknown algorithm {other:?}; expected iddpg or ctde"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Actor optimizer and hidden activation for one algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorProfile {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden_activation: Activation,
}

/// Gaussian exploration noise whose std decays linearly with the episode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSchedule {
    pub sigma_start: f64,
    pub sigma_end: f64,
    /// Episodes over which the std decays; defaults to 80% of the run.
    pub decay_episodes: Option<usize>,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_start: 0.2,
            sigma_end: 0.01,
            decay_episodes: None,
        }
    }
}

impl NoiseSchedule {
    pub fn resolved_decay(&self, total_episodes: usize) -> usize {
        self.decay_episodes
            .unwrap_or_else(|| ((total_episodes as f64) * 0.8).round() as usize)
            .max(1)
    }

    pub fn sigma(&self, episode: usize, total_episodes: usize) -> f64 {
        let frac = (episode as f64 / self.resolved_decay(total_episodes) as f64).min(1.0);
        self.sigma_start + (self.sigma_end - self.sigma_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_start >= 0.0 && self.sigma_end >= 0.0 && self.sigma_end <= self.sigma_start)
            || !self.sigma_start.is_finite()
            || self.decay_episodes == Some(0)
        {
            return Err(Error::Config(format!(
                "noise schedule needs 0 ≤ sigma_end ≤ sigma_start and positive decay ({self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup_transitions: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    /// Positive factor applied to rewards in the critic targets.
    pub reward_scale: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic_hidden_activation: Activation,
    pub critic_learning_rate: f64,
    pub critic_weight_decay: f64,
    pub ctde_actor: ActorProfile,
    pub iddpg_actor: ActorProfile,
    pub noise: NoiseSchedule,
    /// CTDE only: one critic trained on the team-mean reward, shared by all actors.
    pub share_critic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            batch_size: 100,
            tau: 0.005,
            buffer_capacity: 1_000_000,
            warmup_transitions: 1000,
            update_every: 1,
            reward_scale: 1.0,
            actor_hidden: vec![100, 150, 100],
            critic_hidden: vec![150, 200, 150],
            critic_hidden_activation: Activation::LeakyRelu,
            critic_learning_rate: 0.001,
            critic_weight_decay: 0.0001,
            ctde_actor: ActorProfile {
                learning_rate: 0.003,
                weight_decay: 0.0001,
                hidden_activation: Activation::LeakyRelu,
            },
            iddpg_actor: ActorProfile {
                learning_rate: 0.005,
                weight_decay: 0.0003,
                hidden_activation: Activation::Rrelu,
            },
            noise: NoiseSchedule::default(),
            share_critic: false,
        }
    }
}

impl TrainConfig {
    pub fn actor_profile(&self, algo: Algorithm) -> ActorProfile {
        match algo {
            Algorithm::Ctde => self.ctde_actor,
            Algorithm::Iddpg => self.iddpg_actor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be positive and not exceed buffer_capacity");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.update_every == 0 {
            return bad("update_every must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if self.actor_hidden.iter().chain(&self.critic_hidden).any(|&w| w == 0) {
            return bad("hidden widths must be positive");
        }
        for (lr, wd) in [
            (self.critic_learning_rate, self.critic_weight_decay),
            (self.ctde_actor.learning_rate, self.ctde_actor.weight_decay),
            (self.iddpg_actor.learning_rate, self.iddpg_actor.weight_decay),
        ] {
            if !(lr > 0.0 && wd >= 0.0 && lr.is_finite() && wd.is_finite()) {
                return bad("learning rates must be positive and weight decays nonnegative");
            }
        }
        self.noise.validate()
    }
}
