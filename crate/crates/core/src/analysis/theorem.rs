use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;
use crate::marl::Minibatch;
use crate::nn::{AdamConfig, AdamState, DenseNet, Mode};
use crate::{Error, Result};

pub const THEOREM1_TOL: f64 = 1e-9;
pub const THEOREM2_TOL: f64 = 1e-9;
/// Variance below this counts as zero when deciding coupling or strict gaps.
pub const STRICT_EPS: f64 = 1e-12;

/// A critic over the joint input `o_1 … o_N ⊕ a_1 … a_N`.
pub trait JointCritic: Sync {
    fn input_width(&self) -> usize;

    /// Values and the partial derivative with respect to input column `col`, per row.
    fn value_and_grad(&self, x: ArrayView2<'_, f64>, col: usize) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl JointCritic for DenseNet {
    fn input_width(&self) -> usize {
        DenseNet::input_width(self)
    }

    fn value_and_grad(&self, x: ArrayView2<'_, f64>, col: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.output_width() != 1 || col >= self.input_width() {
            return Err(Error::Contract("critic must be scalar-valued with the column in range".into()));
        }
        let (q, cache) = self.forward(x, Mode::Eval)?;
        let ones = Array2::ones((x.nrows(), 1));
        let g = self.backward(&cache, ones.view())?;
        Ok((q.column(0).to_vec(), g.input.column(col).to_vec()))
    }
}

/// `Q̂ = scale · a_i · a_j` over the joint input of `n_agents` agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductCritic {
    pub n_agents: usize,
    pub i: usize,
    pub j: usize,
    pub scale: f64,
}

impl JointCritic for ProductCritic {
    fn input_width(&self) -> usize {
        (OBS_DIM + 1) * self.n_agents
    }

    fn value_and_grad(&self, x: ArrayView2<'_, f64>, col: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let base = OBS_DIM * self.n_agents;
        let (ci, cj) = (base + self.i, base + self.j);
        let mut v = Vec::with_capacity(x.nrows());
        let mut g = Vec::with_capacity(x.nrows());
        for row in x.rows() {
            v.push(self.scale * row[ci] * row[cj]);
            let d = match (col == ci, col == cj) {
                (true, true) => 2.0 * row[ci],
                (true, false) => row[cj],
                (false, true) => row[ci],
                _ => 0.0,
            };
            g.push(self.scale * d);
        }
        Ok((v, g))
    }
}

fn check_shapes(critic: &dyn JointCritic, buffer: &Minibatch, i: usize) -> Result<usize> {
    let n = buffer.n_agents();
    if buffer.is_empty() {
        return Err(Error::Domain("buffer must be nonempty".into()));
    }
    if i >= n || critic.input_width() != (OBS_DIM + 1) * n || buffer.obs.ncols() != OBS_DIM * n {
        return Err(Error::Contract("critic, buffer and agent index disagree".into()));
    }
    Ok(n)
}

/// Rows `(o_i, a_i, o_{−i}^m, a_{−i}^m)` for every buffer entry `m`.
fn substituted_rows(buffer: &Minibatch, i: usize, own_obs: &[f64], own_action: f64) -> Array2<f64> {
    let n = buffer.n_agents();
    let mut x = Array2::zeros((buffer.len(), (OBS_DIM + 1) * n));
    x.slice_mut(s![.., ..OBS_DIM * n]).assign(&buffer.obs);
    x.slice_mut(s![.., OBS_DIM * n..]).assign(&buffer.actions);
    for mut row in x.rows_mut() {
        for k in 0..OBS_DIM {
            row[i * OBS_DIM + k] = own_obs[k];
        }
        row[OBS_DIM * n + i] = own_action;
    }
    x
}

/// Exact empirical mean of `Q̂` with agent `i`'s observation and action fixed.
pub fn marginalize_critic(
    critic: &dyn JointCritic,
    buffer: &Minibatch,
    i: usize,
    own_obs: &[f64],
    own_action: f64,
) -> Result<f64> {
    let n = check_shapes(critic, buffer, i)?;
    if own_obs.len() != OBS_DIM {
        return Err(Error::Contract("own observation must have 5 features".into()));
    }
    let x = substituted_rows(buffer, i, own_obs, own_action);
    let (v, _) = critic.value_and_grad(x.view(), OBS_DIM * n + i)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-sample actor Jacobians and critic action-derivatives over all `(k, m)` pairs.
#[derive(Debug, Clone)]
pub struct GradientSampleSet {
    /// `jac[k]` = ∇_θ μ_i(o_i^k), flattened in parameter order.
    pub jac: Vec<Vec<f64>>,
    /// `dq[k][m]` = ∂Q̂/∂a_i at `(o_i^k, μ_i(o_i^k), o_{−i}^m, a_{−i}^m)`.
    pub dq: Vec<Vec<f64>>,
}

impl GradientSampleSet {
    pub fn build(actor: &DenseNet, critic: &dyn JointCritic, buffer: &Minibatch, i: usize) -> Result<Self> {
        let n = check_shapes(critic, buffer, i)?;
        if actor.input_width() != OBS_DIM || actor.output_width() != 1 {
            return Err(Error::Contract("actor must map 5 features to one action".into()));
        }
        let m = buffer.len();
        let own = buffer.obs.slice(s![.., i * OBS_DIM..(i + 1) * OBS_DIM]).to_owned();
        let mut jac = Vec::with_capacity(m);
        let mut mu = Vec::with_capacity(m);
        for k in 0..m {
            let row = own.slice(s![k..k + 1, ..]);
            let (y, cache) = actor.forward(row, Mode::Eval)?;
            mu.push(y[[0, 0]]);
            jac.push(actor.backward(&cache, Array2::ones((1, 1)).view())?.flat_params());
        }
        let mut dq = Vec::with_capacity(m);
        for k in 0..m {
            let x = substituted_rows(buffer, i, own.row(k).as_slice().unwrap(), mu[k]);
            dq.push(critic.value_and_grad(x.view(), OBS_DIM * n + i)?.1);
        }
        Ok(Self { jac, dq })
    }

    pub fn len(&self) -> usize {
        self.jac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jac.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.jac.first().map_or(0, Vec::len)
    }

    /// `∂Q_i/∂a_i` of the marginalized critic at `(o_i^k, μ_i(o_i^k))`.
    pub fn marginal_dq(&self, k: usize) -> f64 {
        self.dq[k].iter().sum::<f64>() / self.dq[k].len() as f64
    }

    /// Decentralized samples `g_d(k) = J_k · Ḡ_k`.
    pub fn g_d(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|k| {
                let gbar = self.marginal_dq(k);
                self.jac[k].iter().map(|j| j * gbar).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub mean_g_d: Vec<f64>,
    pub mean_g_c: Vec<f64>,
    pub max_abs_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    /// Per-component `Var[g_c] − Var[g_d]`.
    pub variance_gap: Vec<f64>,
    pub min_gap: f64,
    pub violations: usize,
    pub strictly_positive: usize,
    /// Whether `∂Q̂/∂a_i` varies with the other agents' part where the actor Jacobian is nonzero.
    pub coupled: bool,
    pub passed: bool,
}

pub fn theorem1_from_samples(set: &GradientSampleSet) -> Theorem1Report {
    let (m, p) = (set.len(), set.n_params());
    let g_d = set.g_d();
    let mut mean_g_d = vec![0.0; p];
    let mut mean_g_c = vec![0.0; p];
    for k in 0..m {
        for q in 0..p {
            mean_g_d[q] += g_d[k][q];
            mean_g_c[q] += set.dq[k].iter().map(|g| set.jac[k][q] * g).sum::<f64>();
        }
    }
    mean_g_d.iter_mut().for_each(|v| *v /= m as f64);
    mean_g_c.iter_mut().for_each(|v| *v /= (m * m) as f64);
    let max_abs_diff = mean_g_d
        .iter()
        .zip(&mean_g_c)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Theorem1Report {
        passed: max_abs_diff < THEOREM1_TOL,
        mean_g_d,
        mean_g_c,
        max_abs_diff,
    }
}

pub fn theorem2_from_samples(set: &GradientSampleSet) -> Theorem2Report {
    let (m, p) = (set.len(), set.n_params());
    let g_d = set.g_d();
    let t1 = theorem1_from_samples(set);
    let mut gap = vec![0.0; p];
    for q in 0..p {
        let var_d = g_d.iter().map(|g| (g[q] - t1.mean_g_d[q]).powi(2)).sum::<f64>() / m as f64;
        let var_c = (0..m)
            .map(|k| {
                set.dq[k]
                    .iter()
                    .map(|g| (set.jac[k][q] * g - t1.mean_g_c[q]).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / (m * m) as f64;
        gap[q] = var_c - var_d;
    }
    // Coupling counts only where it reaches the actor: the law-of-total-variance
    // gap (1/M)·Σ_k J_kq²·Var_m G(k,m) must exceed the threshold for some q.
    let var_g: Vec<f64> = (0..m)
        .map(|k| {
            let mean = set.marginal_dq(k);
            set.dq[k].iter().map(|g| (g - mean).powi(2)).sum::<f64>() / m as f64
        })
        .collect();
    let coupled = (0..p).any(|q| (0..m).map(|k| set.jac[k][q].powi(2) * var_g[k]).sum::<f64>() / m as f64 > STRICT_EPS);
    let violations = gap.iter().filter(|&&g| g < -THEOREM2_TOL).count();
    let strictly_positive = gap.iter().filter(|&&g| g > STRICT_EPS).count();
    Theorem2Report {
        min_gap: gap.iter().cloned().fold(f64::INFINITY, f64::min),
        passed: violations == 0 && (!coupled || strictly_positive > 0),
        variance_gap: gap,
        violations,
        strictly_positive,
        coupled,
    }
}

/// Mean decentralized and centralized policy gradients over the empirical buffer.
pub fn verify_theorem1(actor: &DenseNet, critic: &dyn JointCritic, buffer: &Minibatch, i: usize) -> Result<Theorem1Report> {
    Ok(theorem1_from_samples(&GradientSampleSet::build(actor, critic, buffer, i)?))
}

/// Component-wise variance ordering of the two gradient estimators.
pub fn verify_theorem2(actor: &DenseNet, critic: &dyn JointCritic, buffer: &Minibatch, i: usize) -> Result<Theorem2Report> {
    Ok(theorem2_from_samples(&GradientSampleSet::build(actor, critic, buffer, i)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCriticProbe {
    /// Final mean squared error of the fitted decentralized critic.
    pub fit_mse: f64,
    /// `‖ḡ_trained − ḡ_c‖ / ‖ḡ_c‖`.
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Fits a decentralized critic on `(o_i, a_i) ↦ marginal Q̂` and compares its
/// mean policy gradient with the centralized one.
pub fn trained_critic_probe(
    actor: &DenseNet,
    critic: &dyn JointCritic,
    buffer: &Minibatch,
    i: usize,
    hidden: &[usize],
    steps: usize,
    seed: u64,
) -> Result<TrainedCriticProbe> {
    use crate::nn::Activation;
    use rand::{Rng, SeedableRng};

    let n = check_shapes(critic, buffer, i)?;
    let m = buffer.len();
    let own = buffer.obs.slice(s![.., i * OBS_DIM..(i + 1) * OBS_DIM]).to_owned();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let per = 8;
    let mut x = Array2::zeros((m * per, OBS_DIM + 1));
    let mut y = Array2::zeros((m * per, 1));
    for k in 0..m {
        for r in 0..per {
            let a: f64 = if r == 0 { actor.predict_one(own.row(k).as_slice().unwrap())?[0] } else { rng.random() };
            let row = k * per + r;
            x.slice_mut(s![row, ..OBS_DIM]).assign(&own.row(k));
            x[[row, OBS_DIM]] = a;
            let sub = substituted_rows(buffer, i, own.row(k).as_slice().unwrap(), a);
            let (v, _) = critic.value_and_grad(sub.view(), OBS_DIM * n + i)?;
            y[[row, 0]] = v.iter().sum::<f64>() / m as f64;
        }
    }
    let mut sizes = vec![OBS_DIM + 1];
    sizes.extend(hidden);
    sizes.push(1);
    let mut acts = vec![Activation::Sigmoid; hidden.len()];
    acts.push(Activation::Linear);
    let mut net = DenseNet::init(&sizes, &acts, seed)?;
    let mut opt = AdamState::new(&net, AdamConfig::new(0.01, 0.0))?;
    let rows = x.nrows() as f64;
    let mut mse = f64::INFINITY;
    for _ in 0..steps {
        let (q, cache) = net.forward(x.view(), Mode::Eval)?;
        let resid = &q - &y;
        mse = resid.iter().map(|r| r * r).sum::<f64>() / rows;
        let upstream = resid.mapv(|r| 2.0 * r / rows);
        let g = net.backward(&cache, upstream.view())?;
        opt.step(&mut net, &g)?;
    }

    let set = GradientSampleSet::build(actor, critic, buffer, i)?;
    let centralized = theorem1_from_samples(&set).mean_g_c;
    let mut trained = vec![0.0; set.n_params()];
    for k in 0..m {
        let mut input = own.row(k).to_vec();
        input.push(actor.predict_one(own.row(k).as_slice().unwrap())?[0]);
        let xi = ArrayView2::from_shape((1, OBS_DIM + 1), &input).unwrap();
        let (_, d) = JointCritic::value_and_grad(&net, xi, OBS_DIM)?;
        for (t, j) in trained.iter_mut().zip(&set.jac[k]) {
            *t += j * d[0] / m as f64;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = trained.iter().zip(&centralized).map(|(a, b)| a - b).collect();
    let relative_error = norm(&diff) / norm(&centralized).max(1e-300);
    let tolerance = 0.1;
    Ok(TrainedCriticProbe {
        fit_mse: mse,
        relative_error,
        tolerance,
        passed: relative_error <= tolerance,
    })
}
