use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::agent::select_action;
use super::{Algorithm, CriticMode, DdpgAgent, JointTransition, Minibatch, Normalizer, ReplayBuffer, TrainConfig};
use crate::analysis::{fairness_ratio, total_variation, MetricsRecord};
use crate::env::{EvChargingEnv, GridConfig, Observation, StepOutcome, TraceWriter, OBS_DIM};
use crate::par::Exec;
use crate::rng::{Component, SeedStreams, StreamRng};
use crate::{Error, Result};

/// Stateful training loop for one algorithm and one seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    grid: GridConfig,
    cfg: TrainConfig,
    algo: Algorithm,
    exec: Exec,
    streams: SeedStreams,
    env: EvChargingEnv,
    normalizers: Vec<Normalizer>,
    learners: Vec<(DdpgAgent, StreamRng)>,
    buffer: ReplayBuffer,
    noise_rng: StreamRng,
    sampling_rng: StreamRng,
    env_steps: usize,
    updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub algo: Algorithm,
    pub agents: Vec<DdpgAgent>,
    pub metrics: Vec<MetricsRecord>,
    /// Mean critic loss per episode, `None` before updates begin.
    pub critic_loss: Vec<Option<f64>>,
    pub updates: usize,
}

impl Trainer {
    pub fn new(grid: &GridConfig, cfg: &TrainConfig, algo: Algorithm, seed: u64) -> Result<Self> {
        grid.validate()?;
        cfg.validate()?;
        if cfg.share_critic && algo != Algorithm::Ctde {
            return Err(Error::Config("share_critic applies to ctde only".into()));
        }
        let n = grid.n_agents;
        let streams = SeedStreams::new(seed);
        let mode = match algo {
            Algorithm::Iddpg => CriticMode::Decentralized,
            Algorithm::Ctde => CriticMode::Centralized,
        };
        let profile = cfg.actor_profile(algo);
        let learners = (0..n)
            .map(|i| {
                let k = i as u32;
                let agent = DdpgAgent::new(
                    i,
                    n,
                    mode,
                    profile,
                    cfg,
                    streams.seed(Component::Init, 2 * k),
                    streams.seed(Component::Init, 2 * k + 1),
                )?;
                Ok((agent, streams.stream(Component::Update, k)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            env: EvChargingEnv::new(grid.clone())?,
            normalizers: Normalizer::for_grid(grid)?,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, n)?,
            noise_rng: streams.stream(Component::Noise, 0),
            sampling_rng: streams.stream(Component::Sampling, 0),
            grid: grid.clone(),
            cfg: cfg.clone(),
            algo,
            exec: Exec::default(),
            streams,
            learners,
            env_steps: 0,
            updates: 0,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn agents(&self) -> Vec<&DdpgAgent> {
        self.learners.iter().map(|(a, _)| a).collect()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn normalizers(&self) -> &[Normalizer] {
        &self.normalizers
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// One noisy episode with learning; returns its metrics and mean critic loss.
    pub fn run_episode(&mut self, episode: usize, total_episodes: usize) -> Result<(MetricsRecord, Option<f64>)> {
        let n = self.grid.n_agents;
        let sigma = self.cfg.noise.sigma(episode, total_episodes);
        let mut obs = self.env.reset(self.streams.seed(Component::Env, episode as u32));
        let mut acc = EpisodeAccumulator::new(n);
        let mut losses = Vec::new();
        while !self.env.is_done() {
            let mut actions = Vec::with_capacity(n);
            for (i, (agent, _)) in self.learners.iter().enumerate() {
                actions.push(select_action(agent, &self.normalizers[i], &obs[i], sigma, &mut self.noise_rng)?);
            }
            let out = self.env.step(&actions)?;
            acc.push(&out);
            self.buffer.push(JointTransition {
                obs: flatten(&obs),
                actions: out.info.actions.clone(),
                rewards: out.rewards.clone(),
                next_obs: flatten(&out.observations),
                done: out.done,
            })?;
            self.env_steps += 1;
            let ready = self.buffer.len() >= self.cfg.warmup_transitions.max(self.cfg.batch_size);
            if ready && self.env_steps % self.cfg.update_every == 0 {
                losses.push(self.update_round()?);
            }
            obs = out.observations;
        }
        let loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        Ok((acc.finish(episode, &self.grid)?, loss))
    }

    /// Critic, actor and target updates for every agent on one shared minibatch.
    /// Returns the mean pre-step critic loss.
    pub fn update_round(&mut self) -> Result<f64> {
        let idx = self.buffer.sample_indices(self.cfg.batch_size, &mut self.sampling_rng)?;
        let batch = self.buffer.minibatch(&idx, &self.normalizers);
        let next_actions = self.target_actions(&batch)?;
        let rewards = &batch.rewards * self.cfg.reward_scale;
        let (gamma, tau) = (self.cfg.gamma, self.cfg.tau);
        self.updates += 1;

        if self.cfg.share_critic {
            let team: Vec<f64> = rewards.rows().into_iter().map(|r| r.mean().unwrap()).collect();
            let team = ndarray::Array1::from(team);
            let loss = self.learners[0]
                .0
                .update_critic(&batch, team.view(), next_actions.view(), gamma)?;
            let shared = self.learners[0].0.critic.clone();
            for (agent, _) in &mut self.learners[1..] {
                agent.critic = shared.clone();
            }
            let res = self.exec.map_mut(&mut self.learners, |_, (agent, rng)| {
                agent.update_actor(&batch, rng)?;
                agent.soft_update_targets(tau)
            });
            res.into_iter().collect::<Result<Vec<_>>>()?;
            return Ok(loss);
        }

        let res = self.exec.map_mut(&mut self.learners, |i, (agent, rng)| {
            let loss = agent.update_critic(&batch, rewards.column(i), next_actions.view(), gamma)?;
            agent.update_actor(&batch, rng)?;
            agent.soft_update_targets(tau)?;
            Ok(loss)
        });
        let losses = res.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    fn target_actions(&self, batch: &Minibatch) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((batch.len(), self.grid.n_agents));
        for (i, (agent, _)) in self.learners.iter().enumerate() {
            let a = agent.actor.target.predict(agent.own_obs(batch.next_obs.view()).view())?;
            out.column_mut(i).assign(&a.column(0));
        }
        Ok(out)
    }

    pub fn train(mut self, episodes: usize) -> Result<TrainRun> {
        let mut metrics = Vec::with_capacity(episodes);
        let mut critic_loss = Vec::with_capacity(episodes);
        for e in 0..episodes {
            let (m, l) = self.run_episode(e, episodes)?;
            metrics.push(m);
            critic_loss.push(l);
        }
        Ok(TrainRun {
            algo: self.algo,
            agents: self.learners.into_iter().map(|(a, _)| a).collect(),
            metrics,
            critic_loss,
            updates: self.updates,
        })
    }
}

pub fn train(grid: &GridConfig, cfg: &TrainConfig, algo: Algorithm, episodes: usize, seed: u64) -> Result<TrainRun> {
    Trainer::new(grid, cfg, algo, seed)?.train(episodes)
}

fn flatten(obs: &[Observation]) -> Vec<f64> {
    obs.iter().flat_map(|o| o.to_array()).collect()
}

struct EpisodeAccumulator {
    returns: Vec<f64>,
    powers: Vec<Vec<f64>>,
    bills: Vec<f64>,
    batteries: Vec<f64>,
    prices: Vec<f64>,
    costs: Vec<f64>,
}

impl EpisodeAccumulator {
    fn new(n: usize) -> Self {
        Self {
            returns: vec![0.0; n],
            powers: vec![vec![0.0]; n],
            bills: vec![0.0; n],
            batteries: vec![0.0; n],
            prices: Vec::new(),
            costs: Vec::new(),
        }
    }

    fn push(&mut self, out: &StepOutcome) {
        for i in 0..self.returns.len() {
            self.returns[i] += out.rewards[i];
            self.powers[i].push(out.info.powers[i]);
            self.bills[i] += out.info.bills[i];
            self.batteries[i] = out.info.batteries[i];
        }
        self.prices.push(out.info.price);
        self.costs.push(out.info.network_cost);
    }

    fn finish(self, episode: usize, grid: &GridConfig) -> Result<MetricsRecord> {
        let tv = self
            .powers
            .iter()
            .zip(grid.agent_specs())
            .map(|(p, spec)| total_variation(p, spec.max_power_kw))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsRecord {
            episode,
            fairness: fairness_ratio(&self.returns).ok(),
            tv,
            final_battery: self.batteries,
            total_cost: self.bills.iter().sum(),
            total_bill: self.bills,
            avg_price: self.prices.iter().sum::<f64>() / self.prices.len().max(1) as f64,
            returns: self.returns,
        })
    }
}

/// Noise-free rollouts of fixed policies, averaged per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: Vec<MetricsRecord>,
    /// `N × H`, battery level after each step (kWh).
    pub mean_battery: Vec<Vec<f64>>,
    /// `N × H`, realized power divided by `a_max`.
    pub mean_rate: Vec<Vec<f64>>,
    /// Length `H`, price realized at each step.
    pub mean_price: Vec<f64>,
    /// Length `H`, network cost at each step.
    pub mean_cost: Vec<f64>,
    pub mean_returns: Vec<f64>,
    /// Fraction of episodes each agent left within tolerance of its target.
    pub demand_met: Vec<f64>,
    #[serde(skip)]
    pub trace: String,
}

impl EvalReport {
    pub fn mean_tv(&self) -> f64 {
        crate::analysis::metrics_mean(&self.episodes, |r| r.mean_tv())
    }

    pub fn mean_cost(&self) -> f64 {
        crate::analysis::metrics_mean(&self.episodes, |r| r.total_cost)
    }

    pub fn mean_price(&self) -> f64 {
        crate::analysis::metrics_mean(&self.episodes, |r| r.avg_price)
    }

    pub fn fairness(&self) -> Option<f64> {
        fairness_ratio(&self.mean_returns).ok()
    }
}

struct EvalEpisode {
    record: MetricsRecord,
    battery: Vec<Vec<f64>>,
    rate: Vec<Vec<f64>>,
    price: Vec<f64>,
    cost: Vec<f64>,
    met: Vec<bool>,
    trace: String,
}

pub fn evaluate(agents: &[DdpgAgent], grid: &GridConfig, episodes: usize, seed: u64) -> Result<EvalReport> {
    evaluate_with(agents, grid, episodes, seed, Exec::default())
}

pub fn evaluate_with(
    agents: &[DdpgAgent],
    grid: &GridConfig,
    episodes: usize,
    seed: u64,
    exec: Exec,
) -> Result<EvalReport> {
    grid.validate()?;
    let n = grid.n_agents;
    if agents.len() != n {
        return Err(Error::Contract(format!("{} agents for a grid of {n}", agents.len())));
    }
    for (i, a) in agents.iter().enumerate() {
        if a.index != i
            || a.n_agents != n
            || a.actor.net.input_width() != OBS_DIM
            || a.actor.net.output_width() != 1
            || a.critic.net.input_width() != a.mode.input_width(n)
        {
            return Err(Error::Contract(format!("agent {i} does not fit this grid")));
        }
    }
    if episodes == 0 {
        return Err(Error::Domain("evaluation needs at least one episode".into()));
    }
    let normalizers = Normalizer::for_grid(grid)?;
    let specs = grid.agent_specs();
    let streams = SeedStreams::new(seed);
    let h = grid.horizon;

    let runs = exec.map_range(episodes, |e| -> Result<EvalEpisode> {
        let mut env = EvChargingEnv::new(grid.clone())?;
        let mut obs = env.reset(streams.seed(Component::Eval, e as u32));
        let mut acc = EpisodeAccumulator::new(n);
        let mut battery = vec![Vec::with_capacity(h); n];
        let mut rate = vec![Vec::with_capacity(h); n];
        let mut trace = TraceWriter::new();
        while !env.is_done() {
            let actions = agents
                .iter()
                .zip(&normalizers)
                .zip(&obs)
                .map(|((a, norm), o)| a.act(&norm.normalize(&o.to_array())))
                .collect::<Result<Vec<_>>>()?;
            let out = env.step(&actions)?;
            for i in 0..n {
                battery[i].push(out.info.batteries[i]);
                rate[i].push(out.info.powers[i] / specs[i].max_power_kw);
            }
            trace.record(e, &out);
            acc.push(&out);
            obs = out.observations;
        }
        let met = env
            .states()
            .iter()
            .zip(&specs)
            .map(|(s, sp)| sp.target() - s.soc_kwh <= sp.tolerance_kwh + 1e-9)
            .collect();
        let price = acc.prices.clone();
        let cost = acc.costs.clone();
        Ok(EvalEpisode {
            record: acc.finish(e, grid)?,
            battery,
            rate,
            price,
            cost,
            met,
            trace: trace.into_string(),
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let m = episodes as f64;
    let mut report = EvalReport {
        episodes: Vec::with_capacity(episodes),
        mean_battery: vec![vec![0.0; h]; n],
        mean_rate: vec![vec![0.0; h]; n],
        mean_price: vec![0.0; h],
        mean_cost: vec![0.0; h],
        mean_returns: vec![0.0; n],
        demand_met: vec![0.0; n],
        trace: String::new(),
    };
    for (k, run) in runs.into_iter().enumerate() {
        for i in 0..n {
            for t in 0..h {
                report.mean_battery[i][t] += run.battery[i][t] / m;
                report.mean_rate[i][t] += run.rate[i][t] / m;
            }
            report.mean_returns[i] += run.record.returns[i] / m;
            report.demand_met[i] += if run.met[i] { 1.0 } else { 0.0 };
        }
        for t in 0..h {
            report.mean_price[t] += run.price[t] / m;
            report.mean_cost[t] += run.cost[t] / m;
        }
        if k == 0 {
            report.trace.push_str(&run.trace);
        } else {
            report.trace.extend(run.trace.lines().skip(1).map(|l| format!("{l}\n")));
        }
        report.episodes.push(run.record);
    }
    report.demand_met.iter_mut().for_each(|d| *d /= m);
    Ok(report)
}
