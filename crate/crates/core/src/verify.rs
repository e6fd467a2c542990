//! Randomized property suites with replayable per-instance seeds.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{theorem1_from_samples, theorem2_from_samples, GradientSampleSet};
use crate::env::{EVAgentSpec, EvChargingEnv, GridConfig, PriceModel, SamplingConfig, OBS_DIM};
use crate::marl::Minibatch;
use crate::nn::{Activation, DenseNet, ForwardCache, GradientBundle, Mode};
use crate::par::Exec;
use crate::rng::{Component, SeedStreams};
use crate::{Error, Result};

pub const GRADCHECK_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-4;
pub const BILLING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gradcheck,
    Theorem1,
    Theorem2,
    EnvInvariants,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradcheck => "gradcheck",
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::EnvInvariants => "env-invariants",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gradcheck" => Ok(Suite::Gradcheck),
            "theorem1" => Ok(Suite::Theorem1),
            "theorem2" => Ok(Suite::Theorem2),
            "env-invariants" => Ok(Suite::EnvInvariants),
            other => Err(Error::Config(format!(
                "unknown suite {other:?}; expected gradcheck, theorem1, theorem2 or env-invariants"
            ))),
        }
    }
}

/// Outcome of one random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Seed that regenerates exactly this instance.
    pub instance_seed: u64,
    /// Headline statistic (max relative error, max difference, min gap, ...).
    pub metric: f64,
    pub passed: bool,
    /// Environment steps simulated (env-invariants only).
    pub steps: usize,
    /// Component that failed first, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub master_seed: u64,
    pub trials: Vec<TrialResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(|t| !t.passed)
    }

    pub fn total_steps(&self) -> usize {
        self.trials.iter().map(|t| t.steps).sum()
    }

    pub fn worst_metric(&self) -> f64 {
        let m = self.trials.iter().map(|t| t.metric);
        match self.suite {
            Suite::Theorem2 => m.fold(f64::INFINITY, f64::min),
            _ => m.fold(0.0, f64::max),
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "suite {} · master seed {} · {} trials\n{:>6}  {:>20}  {:>14}  {:<6}  {}\n",
            self.suite.name(),
            self.master_seed,
            self.trials.len(),
            "trial",
            "instance_seed",
            "metric",
            "result",
            "detail"
        );
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{:>6}  {:>20}  {:>14.6e}  {:<6}  {}",
                t.trial,
                t.instance_seed,
                t.metric,
                if t.passed { "PASS" } else { "FAIL" },
                t.failure.as_deref().unwrap_or("")
            );
        }
        let _ = writeln!(
            out,
            "{}: {}/{} passed",
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials.iter().filter(|t| t.passed).count(),
            self.trials.len()
        );
        out
    }
}

/// Signature of a backward pass, so tests can substitute a broken one.
pub type BackwardFn = dyn Fn(&DenseNet, &ForwardCache, ArrayView2<'_, f64>) -> Result<GradientBundle> + Sync;

pub fn run_suite(suite: Suite, master_seed: u64, trials: usize) -> Result<SuiteReport> {
    let backward = |net: &DenseNet, cache: &ForwardCache, up: ArrayView2<'_, f64>| net.backward(cache, up);
    run_suite_with(suite, master_seed, trials, &backward)
}

pub fn run_suite_with(suite: Suite, master_seed: u64, trials: usize, backward: &BackwardFn) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let streams = SeedStreams::new(master_seed);
    let results = Exec::default().map_range(trials, |t| {
        let seed = streams.seed(Component::Verify, t as u32);
        let mut r = run_instance(suite, seed, backward)?;
        r.trial = t;
        Ok(r)
    });
    Ok(SuiteReport {
        suite,
        master_seed,
        trials: results.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Regenerates and checks one instance from its seed.
pub fn run_instance(suite: Suite, instance_seed: u64, backward: &BackwardFn) -> Result<TrialResult> {
    let mut steps = 0;
    let (metric, failure) = match suite {
        Suite::Gradcheck => gradcheck_instance(instance_seed, backward)?,
        Suite::Theorem1 => {
            let (actor, critic, buffer, i) = theorem_instance(instance_seed)?;
            let r = theorem1_from_samples(&GradientSampleSet::build(&actor, &critic, &buffer, i)?);
            let fail = (!r.passed).then(|| {
                let (q, d) = r
                    .mean_g_d
                    .iter()
                    .zip(&r.mean_g_c)
                    .map(|(a, b)| (a - b).abs())
                    .enumerate()
                    .fold((0, 0.0), |acc, (q, d)| if d > acc.1 { (q, d) } else { acc });
                format!("actor parameter {q}: |mean g_d − mean g_c| = {d:.3e}")
            });
            (r.max_abs_diff, fail)
        }
        Suite::Theorem2 => {
            let (actor, critic, buffer, i) = theorem_instance(instance_seed)?;
            let r = theorem2_from_samples(&GradientSampleSet::build(&actor, &critic, &buffer, i)?);
            let fail = (!r.passed).then(|| {
                if r.violations > 0 {
                    format!("{} components with Var[g_c] < Var[g_d] (min gap {:.3e})", r.violations, r.min_gap)
                } else {
                    "coupled critic but no strictly positive variance gap".to_string()
                }
            });
            (r.min_gap, fail)
        }
        Suite::EnvInvariants => env_instance(instance_seed, &mut steps)?,
    };
    Ok(TrialResult {
        trial: 0,
        instance_seed,
        metric,
        passed: failure.is_none(),
        steps,
        failure,
    })
}

fn random_activation(rng: &mut ChaCha8Rng, choices: &[Activation]) -> Activation {
    choices[rng.random_range(0..choices.len())]
}

fn random_net(
    rng: &mut ChaCha8Rng,
    input: usize,
    output: usize,
    depth: usize,
    max_width: usize,
    hidden: &[Activation],
    out_act: Activation,
) -> Result<DenseNet> {
    let mut sizes = vec![input];
    for _ in 1..depth {
        sizes.push(rng.random_range(1..=max_width));
    }
    sizes.push(output);
    let mut acts: Vec<Activation> = (1..depth).map(|_| random_activation(rng, hidden)).collect();
    acts.push(out_act);
    let mut net = DenseNet::init(&sizes, &acts, rng.random())?;
    for l in net.layers_mut() {
        l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    Ok(net)
}

fn gradcheck_instance(seed: u64, backward: &BackwardFn) -> Result<(f64, Option<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = [Activation::LeakyRelu, Activation::Rrelu, Activation::Sigmoid, Activation::Linear];
    let depth = rng.random_range(1..=4);
    let input = rng.random_range(1..=16);
    let output = rng.random_range(1..=4);
    let out_act = random_activation(&mut rng, &all);
    let mut net = random_net(&mut rng, input, output, depth, 16, &all, out_act)?;
    let batch = rng.random_range(1..=3);
    let x = Array2::from_shape_fn((batch, input), |_| rng.random_range(-1.0..1.0));
    let up = Array2::from_shape_fn((batch, output), |_| rng.random_range(-1.0..1.0));

    let (_, cache) = net.forward(x.view(), Mode::Eval)?;
    let grads = backward(&net, &cache, up.view())?;
    if !grads.matches(&net) {
        return Ok((f64::INFINITY, Some("gradient shapes do not match the network".into())));
    }
    let analytic = grads.flat_params();
    let objective = |net: &DenseNet| -> Result<f64> {
        let y = net.predict(x.view())?;
        Ok((&y * &up).sum())
    };

    // parameter index → (layer, weights|bias) for diagnostics
    let mut labels = Vec::with_capacity(analytic.len());
    for (l, layer) in net.layers().iter().enumerate() {
        labels.extend(std::iter::repeat_n(format!("layer {l} weights"), layer.weights.len()));
        labels.extend(std::iter::repeat_n(format!("layer {l} bias"), layer.bias.len()));
    }
    let theta = net.flat_params();
    let mut worst = 0.0f64;
    let mut failure = None;
    for k in 0..theta.len() {
        let mut p = theta.clone();
        p[k] = theta[k] + FD_STEP;
        net.set_flat_params(&p)?;
        let up_v = objective(&net)?;
        p[k] = theta[k] - FD_STEP;
        net.set_flat_params(&p)?;
        let down_v = objective(&net)?;
        let num = (up_v - down_v) / (2.0 * FD_STEP);
        let rel = (analytic[k] - num).abs() / analytic[k].abs().max(num.abs()).max(REL_FLOOR);
        if rel > worst {
            worst = rel;
        }
        if rel >= GRADCHECK_TOL && failure.is_none() {
            failure = Some(format!(
                "{} (parameter {k}): analytic {:.6e} vs numeric {:.6e}",
                labels[k], analytic[k], num
            ));
        }
    }
    net.set_flat_params(&theta)?;
    Ok((worst, failure))
}

/// Random actor, centralized critic and joint buffer (widths ≤ 8, buffer 256).
pub fn theorem_instance(seed: u64) -> Result<(DenseNet, DenseNet, Minibatch, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = [2, 3, 5][rng.random_range(0..3)];
    let i = rng.random_range(0..n);
    let m = 256;
    let smooth = [Activation::LeakyRelu, Activation::Sigmoid];
    let actor_depth = rng.random_range(2..=3);
    let actor = random_net(
        &mut rng,
        OBS_DIM,
        1,
        actor_depth,
        8,
        &[Activation::LeakyRelu, Activation::Rrelu, Activation::Sigmoid],
        Activation::Sigmoid,
    )?;
    let critic_depth = rng.random_range(2..=3);
    let critic = random_net(&mut rng, (OBS_DIM + 1) * n, 1, critic_depth, 8, &smooth, Activation::Linear)?;
    let mut u = |c| Array2::from_shape_fn((m, c), |_| rng.random::<f64>());
    let buffer = Minibatch {
        obs: u(OBS_DIM * n),
        actions: u(n),
        rewards: Array2::zeros((m, n)),
        next_obs: Array2::zeros((m, OBS_DIM * n)),
        done: vec![0.0; m],
    };
    Ok((actor, critic, buffer, i))
}

fn env_instance(seed: u64, steps: &mut usize) -> Result<(f64, Option<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let horizon = rng.random_range(12..=40);
    let price = PriceModel {
        a: rng.random_range(0.001..0.05),
        b: rng.random_range(0.0..0.2),
        c: rng.random_range(0.0..0.3),
        kappa: rng.random_range(0.5..1.5),
    };
    let baseline_load = if rng.random_bool(0.5) {
        (0..horizon).map(|_| rng.random_range(0.0..20.0)).collect()
    } else {
        Vec::new()
    };
    let ev_overrides = (0..n)
        .map(|_| {
            let battery_kwh = rng.random_range(20.0..80.0);
            EVAgentSpec {
                battery_kwh,
                efficiency: rng.random_range(0.7..1.0),
                max_power_kw: rng.random_range(3.0..11.0),
                target_kwh: Some(battery_kwh * rng.random_range(0.6..1.0)),
                ..EVAgentSpec::default()
            }
        })
        .collect();
    let grid = GridConfig {
        n_agents: n,
        horizon,
        step_hours: rng.random_range(0.25..1.0),
        baseline_load,
        price,
        ev_overrides,
        sampling: SamplingConfig {
            arrival_steps: [0, 5],
            departure_steps: Some([horizon - 5, horizon]),
            initial_soc_fraction: [0.0, 0.9],
        },
        ..GridConfig::default()
    };
    grid.validate()?;

    let mut env = EvChargingEnv::new(grid.clone())?;
    env.reset(rng.random());
    let specs = grid.agent_specs();
    let mut worst: f64 = 0.0;
    while !env.is_done() {
        let before: Vec<f64> = env.states().iter().map(|s| s.soc_kwh).collect();
        let plugged: Vec<bool> = env.states().iter().map(|s| s.plugged_at(env.current_step())).collect();
        let actions: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..1.2)).collect();
        let out = env.step(&actions)?;
        *steps += 1;
        let h = out.info.step;
        for i in 0..n {
            let (p, b) = (out.info.powers[i], out.info.batteries[i]);
            let spec = &specs[i];
            if !(0.0..=spec.max_power_kw + 1e-12).contains(&p) || (!plugged[i] && p != 0.0) {
                return Ok((worst, Some(format!("step {h} agent {i}: power {p} violates cap or plug state"))));
            }
            if !(0.0..=spec.battery_kwh + 1e-9).contains(&b) {
                return Ok((worst, Some(format!("step {h} agent {i}: battery {b} outside [0, B_max]"))));
            }
            let expect = before[i] + spec.efficiency * p * grid.step_hours;
            if (b - expect).abs() > 1e-9 {
                return Ok((worst, Some(format!("step {h} agent {i}: battery {b} but energy balance gives {expect}"))));
            }
        }
        let billed: f64 = out.info.bills.iter().sum::<f64>() + out.info.baseline_bill;
        let err = (billed - price.kappa * out.info.network_cost).abs();
        worst = worst.max(err);
        if err >= BILLING_TOL {
            return Ok((worst, Some(format!("step {h}: Σ bills {billed} vs κ·C {}", price.kappa * out.info.network_cost))));
        }
    }

    // price monotone and convex, cost convex, on a load sweep
    let top = grid.max_total_load() * 1.5;
    let sweep: Vec<f64> = (0..=200).map(|k| top * k as f64 / 200.0).collect();
    let f: Vec<f64> = sweep.iter().map(|&l| price.price(l)).collect::<Result<_>>()?;
    let c: Vec<f64> = sweep.iter().map(|&l| price.network_cost(l)).collect::<Result<_>>()?;
    for k in 1..sweep.len() {
        if f[k] < f[k - 1] - 1e-12 {
            return Ok((worst, Some(format!("price decreases at load {}", sweep[k]))));
        }
    }
    for k in 1..sweep.len() - 1 {
        let tol = 1e-9 * (1.0 + c[k].abs());
        if f[k + 1] - 2.0 * f[k] + f[k - 1] < -tol || c[k + 1] - 2.0 * c[k] + c[k - 1] < -tol {
            return Ok((worst, Some(format!("price or cost not convex at load {}", sweep[k]))));
        }
    }
    Ok((worst, None))
}
