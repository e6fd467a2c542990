use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::{ActorProfile, Minibatch, Normalizer, TrainConfig};
use crate::env::{Observation, OBS_DIM};
use crate::nn::{Activation, AdamConfig, AdamState, Checkpoint, DenseNet, GradientBundle, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticMode {
    Decentralized,
    Centralized,
}

impl CriticMode {
    pub fn input_width(self, n_agents: usize) -> usize {
        match self {
            CriticMode::Decentralized => OBS_DIM + 1,
            CriticMode::Centralized => (OBS_DIM + 1) * n_agents,
        }
    }
}

/// A live network, its target copy and its optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetBundle {
    pub net: DenseNet,
    pub target: DenseNet,
    pub opt: AdamState,
}

impl NetBundle {
    pub fn new(net: DenseNet, adam: AdamConfig) -> Result<Self> {
        let opt = AdamState::new(&net, adam)?;
        Ok(Self {
            target: net.clone(),
            net,
            opt,
        })
    }

    fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        Checkpoint::capture(&self.net, Some(&self.opt)).save(&dir.join(format!("{stem}.json")))?;
        Checkpoint::capture(&self.target, None).save(&dir.join(format!("{stem}_target.json")))
    }

    fn load(dir: &Path, stem: &str) -> Result<Self> {
        let (net, opt) = Checkpoint::load(&dir.join(format!("{stem}.json")))?.restore()?;
        let (target, _) = Checkpoint::load(&dir.join(format!("{stem}_target.json")))?.restore()?;
        let opt = opt.ok_or_else(|| Error::Contract(format!("{stem} checkpoint lacks optimizer state")))?;
        if !target.same_architecture(&net) {
            return Err(Error::Contract(format!("{stem} target differs in architecture")));
        }
        Ok(Self { net, target, opt })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    pub index: usize,
    pub n_agents: usize,
    pub mode: CriticMode,
    pub actor: NetBundle,
    pub critic: NetBundle,
}

impl DdpgAgent {
    pub fn new(
        index: usize,
        n_agents: usize,
        mode: CriticMode,
        profile: ActorProfile,
        cfg: &TrainConfig,
        actor_seed: u64,
        critic_seed: u64,
    ) -> Result<Self> {
        if index >= n_agents {
            return Err(Error::Config(format!("agent index {index} out of range for {n_agents} agents")));
        }
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&cfg.actor_hidden);
        sizes.push(1);
        let mut acts = vec![profile.hidden_activation; cfg.actor_hidden.len()];
        acts.push(Activation::Sigmoid);
        let actor = DenseNet::init(&sizes, &acts, actor_seed)?;

        let mut sizes = vec![mode.input_width(n_agents)];
        sizes.extend(&cfg.critic_hidden);
        sizes.push(1);
        let mut acts = vec![cfg.critic_hidden_activation; cfg.critic_hidden.len()];
        acts.push(Activation::Linear);
        let critic = DenseNet::init(&sizes, &acts, critic_seed)?;

        Ok(Self {
            index,
            n_agents,
            mode,
            actor: NetBundle::new(actor, AdamConfig::new(profile.learning_rate, profile.weight_decay))?,
            critic: NetBundle::new(critic, AdamConfig::new(cfg.critic_learning_rate, cfg.critic_weight_decay))?,
        })
    }

    /// Column of this agent's action inside the critic input.
    pub fn action_column(&self) -> usize {
        match self.mode {
            CriticMode::Decentralized => OBS_DIM,
            CriticMode::Centralized => OBS_DIM * self.n_agents + self.index,
        }
    }

    /// Own normalized observations (`B × 5`) out of the joint block.
    pub fn own_obs(&self, joint_obs: ArrayView2<'_, f64>) -> Array2<f64> {
        let lo = self.index * OBS_DIM;
        joint_obs.slice(s![.., lo..lo + OBS_DIM]).to_owned()
    }

    /// Critic input rows: `o_i ⊕ a_i` or `o_1 … o_N ⊕ a_1 … a_N`.
    pub fn critic_input(&self, joint_obs: ArrayView2<'_, f64>, joint_actions: ArrayView2<'_, f64>) -> Array2<f64> {
        let b = joint_obs.nrows();
        match self.mode {
            CriticMode::Decentralized => {
                let mut x = Array2::zeros((b, OBS_DIM + 1));
                x.slice_mut(s![.., ..OBS_DIM]).assign(&self.own_obs(joint_obs));
                x.column_mut(OBS_DIM).assign(&joint_actions.column(self.index));
                x
            }
            CriticMode::Centralized => {
                let mut x = Array2::zeros((b, (OBS_DIM + 1) * self.n_agents));
                x.slice_mut(s![.., ..OBS_DIM * self.n_agents]).assign(&joint_obs);
                x.slice_mut(s![.., OBS_DIM * self.n_agents..]).assign(&joint_actions);
                x
            }
        }
    }

    /// Deterministic policy output on a normalized observation.
    pub fn act(&self, obs_norm: &[f64; OBS_DIM]) -> Result<f64> {
        Ok(self.actor.net.predict_one(obs_norm)?[0])
    }

    /// `y = r + γ·Q'(next_input)` with bootstrapping cut at terminal steps.
    pub fn critic_td_target(&self, reward: f64, next_input: &[f64], gamma: f64, done: bool) -> Result<f64> {
        if done {
            return Ok(reward);
        }
        let q = self.critic.target.predict_one(next_input)?[0];
        Ok(reward + gamma * q)
    }

    /// One Adam step on the mean squared TD error; returns the pre-step loss.
    /// `next_actions` holds every agent's target-actor action at the next observations.
    pub fn update_critic(
        &mut self,
        batch: &Minibatch,
        rewards: ArrayView1<'_, f64>,
        next_actions: ArrayView2<'_, f64>,
        gamma: f64,
    ) -> Result<f64> {
        let b = batch.len();
        if b == 0 || rewards.len() != b || next_actions.dim() != (b, self.n_agents) {
            return Err(Error::Contract("critic update inputs disagree in batch size".into()));
        }
        let next_in = self.critic_input(batch.next_obs.view(), next_actions);
        let q_next = self.critic.target.predict(next_in.view())?;
        let input = self.critic_input(batch.obs.view(), batch.actions.view());
        let (q, cache) = self.critic.net.forward(input.view(), Mode::Eval)?;
        let mut upstream = Array2::zeros((b, 1));
        let mut loss = 0.0;
        for k in 0..b {
            let y = rewards[k] + (1.0 - batch.done[k]) * gamma * q_next[[k, 0]];
            let resid = q[[k, 0]] - y;
            loss += resid * resid;
            upstream[[k, 0]] = 2.0 * resid / b as f64;
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("critic loss of agent {} is not finite", self.index)));
        }
        let grads = self.critic.net.backward(&cache, upstream.view())?;
        self.critic.opt.step(&mut self.critic.net, &grads)?;
        Ok(loss)
    }

    /// Batch-mean policy gradient for whichever critic this agent carries.
    pub fn actor_gradient(&self, batch: &Minibatch, mode: Mode<'_>) -> Result<GradientBundle> {
        let b = batch.len();
        if b == 0 || batch.n_agents() != self.n_agents {
            return Err(Error::Contract("minibatch does not match agent count".into()));
        }
        let (mu, actor_cache) = self.actor.net.forward(self.own_obs(batch.obs.view()).view(), mode)?;
        let mut actions = batch.actions.clone();
        actions.column_mut(self.index).assign(&mu.column(0));
        let input = self.critic_input(batch.obs.view(), actions.view());
        let (_, critic_cache) = self.critic.net.forward(input.view(), Mode::Eval)?;
        let ones = Array2::from_elem((b, 1), 1.0 / b as f64);
        let dq = self.critic.net.backward(&critic_cache, ones.view())?;
        let col = self.action_column();
        let upstream = dq.input.slice(s![.., col..col + 1]).to_owned();
        self.actor.net.backward(&actor_cache, upstream.view())
    }

    /// Gradient ascent on `E[Q(o, μ(o))]`.
    pub fn update_actor(&mut self, batch: &Minibatch, rng: &mut dyn RngCore) -> Result<()> {
        let mut g = self.actor_gradient(batch, Mode::Train(rng))?;
        g.scale(-1.0);
        self.actor.opt.step(&mut self.actor.net, &g)
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        self.actor.target.soft_update_from(&self.actor.net, tau)?;
        self.critic.target.soft_update_from(&self.critic.net, tau)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.actor.save(dir, &format!("agent{}_actor", self.index))?;
        self.critic.save(dir, &format!("agent{}_critic", self.index))
    }

    pub fn load(dir: &Path, index: usize, n_agents: usize, mode: CriticMode) -> Result<Self> {
        let actor = NetBundle::load(dir, &format!("agent{index}_actor"))?;
        let critic = NetBundle::load(dir, &format!("agent{index}_critic"))?;
        if actor.net.input_width() != OBS_DIM
            || actor.net.output_width() != 1
            || critic.net.input_width() != mode.input_width(n_agents)
            || critic.net.output_width() != 1
        {
            return Err(Error::Contract(format!("checkpoint of agent {index} has the wrong shape")));
        }
        Ok(Self {
            index,
            n_agents,
            mode,
            actor,
            critic,
        })
    }
}

/// `clamp(μ(normalize(o)) + N(0, σ²), 0, 1)`.
pub fn select_action<R: Rng + ?Sized>(
    agent: &DdpgAgent,
    normalizer: &Normalizer,
    obs: &Observation,
    sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    let a = agent.act(&normalizer.normalize(&obs.to_array()))?;
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    Ok((a + noise).clamp(0.0, 1.0))
}

/// Free-function form of [`DdpgAgent::critic_td_target`].
pub fn critic_td_target(agent: &DdpgAgent, reward: f64, next_input: &[f64], gamma: f64, done: bool) -> Result<f64> {
    agent.critic_td_target(reward, next_input, gamma, done)
}

pub fn actor_gradient_decentralized(agent: &DdpgAgent, batch: &Minibatch, mode: Mode<'_>) -> Result<GradientBundle> {
    if agent.mode != CriticMode::Decentralized {
        return Err(Error::Contract("decentralized gradient requested for a centralized agent".into()));
    }
    agent.actor_gradient(batch, mode)
}

/// Other agents' actions come from the sampled transitions.
pub fn actor_gradient_centralized(agent: &DdpgAgent, batch: &Minibatch, mode: Mode<'_>) -> Result<GradientBundle> {
    if agent.mode != CriticMode::Centralized {
        return Err(Error::Contract("centralized gradient requested for a decentralized agent".into()));
    }
    agent.actor_gradient(batch, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8, 8],
            ..TrainConfig::default()
        }
    }

    fn batch(n: usize, b: usize, seed: u64) -> Minibatch {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut u = |r, c| Array2::from_shape_fn((r, c), |_| rng.random::<f64>());
        Minibatch {
            obs: u(b, OBS_DIM * n),
            actions: u(b, n),
            rewards: u(b, n),
            next_obs: u(b, OBS_DIM * n),
            done: (0..b).map(|k| if k % 7 == 6 { 1.0 } else { 0.0 }).collect(),
        }
    }

    #[test]
    fn widths_follow_mode() {
        let c = small_cfg();
        let d = DdpgAgent::new(1, 3, CriticMode::Decentralized, c.iddpg_actor, &c, 1, 2).unwrap();
        let z = DdpgAgent::new(1, 3, CriticMode::Centralized, c.ctde_actor, &c, 1, 2).unwrap();
        assert_eq!(d.critic.net.input_width(), 6);
        assert_eq!(z.critic.net.input_width(), 18);
        assert_eq!(d.actor.net.layer_sizes(), &[5, 8, 1]);
        assert_eq!(z.action_column(), 16);
        assert!(d.actor.target.same_architecture(&d.actor.net));
    }

    #[test]
    fn td_target_arithmetic() {
        let c = small_cfg();
        let mut a = DdpgAgent::new(0, 1, CriticMode::Decentralized, c.iddpg_actor, &c, 1, 2).unwrap();
        for layer in a.critic.target.layers_mut() {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        a.critic.target.layers_mut().last_mut().unwrap().bias[0] = -2.0;
        let x = [0.3; 6];
        assert!((a.critic_td_target(-1.0, &x, 0.95, false).unwrap() + 2.9).abs() < 1e-12);
        assert_eq!(a.critic_td_target(-1.0, &x, 0.95, true).unwrap(), -1.0);
        assert_eq!(a.critic_td_target(-1.0, &x, 0.0, false).unwrap(), -1.0);
    }

    #[test]
    fn zero_sigma_is_deterministic_and_large_sigma_clamps() {
        let c = small_cfg();
        let a = DdpgAgent::new(0, 1, CriticMode::Decentralized, c.iddpg_actor, &c, 1, 2).unwrap();
        let grid = crate::env::GridConfig::with_agents(1);
        let norm = Normalizer::for_agent(&grid, &grid.ev).unwrap();
        let obs = Observation {
            delta_b: 30.0,
            delta_h: 10.0,
            price: 0.2,
            plugged: 1.0,
            departure: 30.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let det = a.act(&norm.normalize(&obs.to_array())).unwrap();
        assert_eq!(select_action(&a, &norm, &obs, 0.0, &mut rng).unwrap(), det);
        for _ in 0..200 {
            let v = select_action(&a, &norm, &obs, 50.0, &mut rng).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let c = small_cfg();
        let a = DdpgAgent::new(0, 2, CriticMode::Decentralized, c.iddpg_actor, &c, 1, 2).unwrap();
        let mb = batch(2, 4, 0);
        assert!(actor_gradient_centralized(&a, &mb, Mode::Eval).is_err());
        assert!(actor_gradient_decentralized(&a, &mb, Mode::Eval).is_ok());
    }

    #[test]
    fn zero_residual_leaves_only_weight_decay() {
        let c = TrainConfig {
            critic_weight_decay: 0.0,
            ..small_cfg()
        };
        let mut a = DdpgAgent::new(0, 1, CriticMode::Decentralized, c.iddpg_actor, &c, 1, 2).unwrap();
        let mb = batch(1, 10, 4);
        let done = Minibatch {
            done: vec![1.0; 10],
            ..mb
        };
        let input = a.critic_input(done.obs.view(), done.actions.view());
        let q = a.critic.net.predict(input.view()).unwrap();
        let before = a.critic.net.clone();
        let loss = a
            .update_critic(&done, q.column(0), done.actions.view(), 0.95)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(a.critic.net, before);
    }

    #[test]
    fn save_load_round_trip() {
        let c = small_cfg();
        let a = DdpgAgent::new(1, 2, CriticMode::Centralized, c.ctde_actor, &c, 5, 6).unwrap();
        let dir = std::env::temp_dir().join(format!("evcharge-agent-{}", std::process::id()));
        a.save(&dir).unwrap();
        let b = DdpgAgent::load(&dir, 1, 2, CriticMode::Centralized).unwrap();
        assert_eq!(a, b);
        assert!(DdpgAgent::load(&dir, 1, 3, CriticMode::Centralized).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
