use ndarray::Array2;
use rand::Rng;

use super::Normalizer;
use crate::env::OBS_DIM;
use crate::{Error, Result};

/// One environment step for all agents. Observations are stored raw,
/// flattened agent-major (`N × 5`).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

impl JointTransition {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    fn is_valid(&self) -> bool {
        let n = self.actions.len();
        self.obs.len() == n * OBS_DIM
            && self.next_obs.len() == n * OBS_DIM
            && self.rewards.len() == n
            && self
                .obs
                .iter()
                .chain(&self.actions)
                .chain(&self.rewards)
                .chain(&self.next_obs)
                .all(|v| v.is_finite())
    }
}

/// Ring buffer of joint transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    n_agents: usize,
    items: Vec<JointTransition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, n_agents: usize) -> Result<Self> {
        if capacity == 0 || n_agents == 0 {
            return Err(Error::Config("replay buffer needs positive capacity and agents".into()));
        }
        Ok(Self {
            capacity,
            n_agents,
            items: Vec::new(),
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> Option<&JointTransition> {
        self.items.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = &JointTransition> {
        self.items.iter()
    }

    pub fn push(&mut self, t: JointTransition) -> Result<()> {
        if t.n_agents() != self.n_agents || !t.is_valid() {
            return Err(Error::Contract("malformed or non-finite joint transition".into()));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Uniform draws with replacement from the filled region.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < batch || batch == 0 {
            return Err(Error::Contract(format!(
                "cannot sample {batch} from a buffer holding {}",
                self.items.len()
            )));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn minibatch(&self, indices: &[usize], normalizers: &[Normalizer]) -> Minibatch {
        Minibatch::gather(indices.iter().map(|&i| &self.items[i]), normalizers)
    }
}

/// Normalized minibatch in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    /// `B × 5N`, agent-major.
    pub obs: Array2<f64>,
    /// `B × N`, already in [0, 1].
    pub actions: Array2<f64>,
    /// `B × N`, raw rewards.
    pub rewards: Array2<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub done: Vec<f64>,
}

impl Minibatch {
    pub fn gather<'a>(items: impl ExactSizeIterator<Item = &'a JointTransition>, normalizers: &[Normalizer]) -> Self {
        let b = items.len();
        let n = normalizers.len();
        let mut mb = Minibatch {
            obs: Array2::zeros((b, n * OBS_DIM)),
            actions: Array2::zeros((b, n)),
            rewards: Array2::zeros((b, n)),
            next_obs: Array2::zeros((b, n * OBS_DIM)),
            done: Vec::with_capacity(b),
        };
        for (row, t) in items.enumerate() {
            for (i, norm) in normalizers.iter().enumerate() {
                let span = i * OBS_DIM..(i + 1) * OBS_DIM;
                let o = norm.normalize(t.obs[span.clone()].try_into().unwrap());
                let o2 = norm.normalize(t.next_obs[span].try_into().unwrap());
                for k in 0..OBS_DIM {
                    mb.obs[[row, i * OBS_DIM + k]] = o[k];
                    mb.next_obs[[row, i * OBS_DIM + k]] = o2[k];
                }
                mb.actions[[row, i]] = t.actions[i];
                mb.rewards[[row, i]] = t.rewards[i];
            }
            mb.done.push(if t.done { 1.0 } else { 0.0 });
        }
        mb
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.actions.ncols()
    }
}
