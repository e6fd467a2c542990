use serde::{Deserialize, Serialize};

use super::net::{DenseNet, GradientBundle};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.epsilon > 0.0
            && [self.learning_rate, self.weight_decay, self.epsilon]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Adam moments for one network, with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        let shapes: Vec<usize> = net.param_blocks().iter().map(|b| b.len()).collect();
        Ok(Self {
            config,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        })
    }

    pub fn matches(&self, net: &DenseNet) -> bool {
        let blocks = net.param_blocks();
        blocks.len() == self.first_moment.len()
            && blocks
                .iter()
                .zip(&self.first_moment)
                .zip(&self.second_moment)
                .all(|((b, m), v)| b.len() == m.len() && b.len() == v.len())
    }

    /// One descent step: `θ ← θ − lr·wd·θ`, then the bias-corrected Adam update.
    pub fn step(&mut self, net: &mut DenseNet, grads: &GradientBundle) -> Result<()> {
        if !self.matches(net) || !grads.matches(net) {
            return Err(Error::Contract("Adam state, gradients and network disagree in shape".into()));
        }
        let AdamConfig {
            learning_rate: lr,
            weight_decay: wd,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * wd;

        let grad_blocks = grads.param_blocks();
        for (((theta, g), m), v) in net
            .param_blocks_mut()
            .into_iter()
            .zip(grad_blocks)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((p, &g), m), v) in theta.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *p *= decay;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
