use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{battery_step, reward, EVAgentSpec, EVState, GridConfig, PriceModel};
use crate::{Error, Result};

/// Number of per-agent observation features.
pub const OBS_DIM: usize = 5;

/// Private observation of one agent, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// `B_exp − B` (kWh).
    pub delta_b: f64,
    /// Steps since arrival, floored at zero.
    pub delta_h: f64,
    /// Price published for the current step.
    pub price: f64,
    /// 1 when the vehicle is connected.
    pub plugged: f64,
    pub departure: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.delta_b, self.delta_h, self.price, self.plugged, self.departure]
    }
}

pub fn build_observation(state: &EVState, spec: &EVAgentSpec, price_now: f64, step: usize) -> Observation {
    Observation {
        delta_b: spec.target() - state.soc_kwh,
        delta_h: step.saturating_sub(state.arrival) as f64,
        price: price_now,
        plugged: if state.plugged_at(step) { 1.0 } else { 0.0 },
        departure: state.departure as f64,
    }
}

/// Network-level quantities of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    /// Actions after clamping to [0, 1].
    pub actions: Vec<f64>,
    /// Realized charging power per agent (kW).
    pub powers: Vec<f64>,
    /// Battery level per agent after the step (kWh).
    pub batteries: Vec<f64>,
    pub total_load: f64,
    pub price: f64,
    pub network_cost: f64,
    pub bills: Vec<f64>,
    /// Share of the network cost attributed to the exogenous baseline load.
    pub baseline_bill: f64,
    /// True when any action fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

/// Episodic simulator over a fixed horizon of charging steps.
#[derive(Debug, Clone)]
pub struct EvChargingEnv {
    config: GridConfig,
    specs: Vec<EVAgentSpec>,
    states: Vec<EVState>,
    step: usize,
    /// Price realized at the previous step; what agents observe.
    published_price: f64,
    done: bool,
}

impl EvChargingEnv {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let specs = config.agent_specs();
        let published_price = config.price.price(config.baseline_at(0))?;
        let states = specs
            .iter()
            .map(|s| EVState::new(s.battery_kwh, 0, config.horizon))
            .collect();
        Ok(Self {
            config,
            specs,
            states,
            step: 0,
            published_price,
            done: true,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn specs(&self) -> &[EVAgentSpec] {
        &self.specs
    }

    pub fn states(&self) -> &[EVState] {
        &self.states
    }

    pub fn n_agents(&self) -> usize {
        self.specs.len()
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn price_model(&self) -> &PriceModel {
        &self.config.price
    }

    /// Samples arrival/departure windows and initial charges from `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a_lo, a_hi] = self.config.sampling.arrival_steps;
        let [d_lo, d_hi] = self.config.sampling.departure_range(self.config.horizon);
        let [f_lo, f_hi] = self.config.sampling.initial_soc_fraction;
        let scenario: Vec<(usize, usize, f64)> = self
            .specs
            .iter()
            .map(|spec| {
                let arrival = rng.random_range(a_lo..=a_hi);
                let departure = rng.random_range(d_lo..=d_hi);
                let frac = if f_hi > f_lo { rng.random_range(f_lo..=f_hi) } else { f_lo };
                (arrival, departure, frac * spec.battery_kwh)
            })
            .collect();
        self.reset_with(&scenario)
            .expect("sampled scenario satisfies validated bounds")
    }

    /// Starts an episode from explicit `(arrival, departure, initial_kwh)` per agent.
    pub fn reset_with(&mut self, scenario: &[(usize, usize, f64)]) -> Result<Vec<Observation>> {
        if scenario.len() != self.specs.len() {
            return Err(Error::Contract(format!(
                "scenario lists {} agents, environment has {}",
                scenario.len(),
                self.specs.len()
            )));
        }
        for (i, (&(arr, dep, b0), spec)) in scenario.iter().zip(&self.specs).enumerate() {
            if !(arr < dep && dep <= self.config.horizon) {
                return Err(Error::Contract(format!(
                    "agent {i}: window [{arr}, {dep}) violates 0 ≤ arrival < departure ≤ H"
                )));
            }
            if !(0.0..=spec.battery_kwh).contains(&b0) {
                return Err(Error::Contract(format!("agent {i}: initial charge {b0} out of range")));
            }
        }
        self.states = scenario
            .iter()
            .map(|&(arr, dep, b0)| EVState::new(b0, arr, dep))
            .collect();
        self.step = 0;
        self.done = false;
        self.published_price = self.config.price.price(self.config.baseline_at(0))?;
        Ok(self.observations())
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.states
            .iter()
            .zip(&self.specs)
            .map(|(st, spec)| build_observation(st, spec, self.published_price, self.step))
            .collect()
    }

    /// Advances one step. Actions are fractions of each charger's limit.
    pub fn step(&mut self, actions: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode; reset first".into()));
        }
        if actions.len() != self.specs.len() {
            return Err(Error::Contract(format!(
                "{} actions for {} agents",
                actions.len(),
                self.specs.len()
            )));
        }
        if actions.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("actions must be finite".into()));
        }
        let h = self.step;
        let dt = self.config.step_hours;
        let clamped = actions.iter().any(|&a| !(0.0..=1.0).contains(&a));
        let actions: Vec<f64> = actions.iter().map(|a| a.clamp(0.0, 1.0)).collect();

        let powers: Vec<f64> = self
            .states
            .iter()
            .zip(&self.specs)
            .zip(&actions)
            .map(|((st, spec), &a)| {
                if !st.plugged_at(h) {
                    return 0.0;
                }
                // trim to the remaining headroom so the battery never overshoots
                let headroom = (spec.battery_kwh - st.soc_kwh).max(0.0);
                (a * spec.max_power_kw).min(headroom / (spec.efficiency * dt))
            })
            .collect();

        let baseline = self.config.baseline_at(h);
        let total_load = powers.iter().sum::<f64>() + baseline;
        let price_model = self.config.price;
        let price = price_model.price(total_load)?;
        let network_cost = price_model.network_cost(total_load)?;
        let bills = powers
            .iter()
            .map(|&p| price_model.user_bill(p.min(total_load), total_load))
            .collect::<Result<Vec<_>>>()?;
        let baseline_bill = price_model.user_bill(baseline, total_load)?;

        let mut rewards = Vec::with_capacity(self.specs.len());
        for ((st, spec), &p) in self.states.iter_mut().zip(&self.specs).zip(&powers) {
            st.plugged = st.plugged_at(h);
            *st = battery_step(spec, st, p, dt)?;
            let gap = spec.target() - st.soc_kwh;
            rewards.push(reward(spec, price, p, gap, h + 1 == st.departure));
        }

        self.step += 1;
        self.done = self.step == self.config.horizon;
        self.published_price = price;
        for st in &mut self.states {
            st.plugged = st.plugged_at(self.step);
        }

        Ok(StepOutcome {
            observations: self.observations(),
            rewards,
            done: self.done,
            info: StepInfo {
                step: h,
                actions,
                powers,
                batteries: self.states.iter().map(|s| s.soc_kwh).collect(),
                total_load,
                price,
                network_cost,
                bills,
                baseline_bill,
                clamped,
            },
        })
    }
}
