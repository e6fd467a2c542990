//! JSON checkpoint format for networks and their optimizer moments.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, AdamConfig, AdamState, Dense, DenseNet};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "evcharge-net/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Row-major `(out, in)` weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn capture(net: &DenseNet, adam: Option<&AdamState>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            layer_sizes: net.layer_sizes().to_vec(),
            activations: net.activations(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.weights.iter().copied().collect())
                .collect(),
            biases: net.layers().iter().map(|l| l.bias.to_vec()).collect(),
            adam: adam.map(|a| AdamRecord {
                config: a.config,
                step_count: a.step_count,
                first_moment: a.first_moment.clone(),
                second_moment: a.second_moment.clone(),
            }),
        }
    }

    pub fn restore(&self) -> Result<(DenseNet, Option<AdamState>)> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Contract(format!(
                "unsupported checkpoint format {:?}, expected {CHECKPOINT_FORMAT:?}",
                self.format
            )));
        }
        let n = self.layer_sizes.len().saturating_sub(1);
        if self.activations.len() != n || self.weights.len() != n || self.biases.len() != n {
            return Err(Error::Contract("checkpoint layer counts disagree".into()));
        }
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let weights = Array2::from_shape_vec((fan_out, fan_in), self.weights[l].clone())
                    .map_err(|e| Error::Contract(format!("layer {l} weights: {e}")))?;
                Ok(Dense {
                    weights,
                    bias: Array1::from(self.biases[l].clone()),
                    activation: self.activations[l],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = DenseNet::from_layers(layers)?;
        let adam = match &self.adam {
            None => None,
            Some(rec) => {
                let mut st = AdamState::new(&net, rec.config)?;
                st.step_count = rec.step_count;
                st.first_moment = rec.first_moment.clone();
                st.second_moment = rec.second_moment.clone();
                if !st.matches(&net) {
                    return Err(Error::Contract("checkpoint Adam moments do not match network".into()));
                }
                Some(st)
            }
        };
        Ok((net, adam))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::GradientBundle;

    #[test]
    fn round_trip_is_exact() {
        let mut net = DenseNet::init(
            &[5, 7, 3, 1],
            &[Activation::Rrelu, Activation::LeakyRelu, Activation::Sigmoid],
            99,
        )
        .unwrap();
        let mut adam = AdamState::new(&net, AdamConfig::new(0.003, 1e-4)).unwrap();
        let mut g = GradientBundle::zeros_like(&net, 1);
        g.weights[0].fill(0.123456789);
        adam.step(&mut net, &g).unwrap();

        let cp = Checkpoint::capture(&net, Some(&adam));
        let back = Checkpoint::from_json(&cp.to_json().unwrap()).unwrap();
        let (net2, adam2) = back.restore().unwrap();
        assert_eq!(net, net2);
        assert_eq!(Some(adam), adam2);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let net = DenseNet::init(&[2, 1], &[Activation::Linear], 0).unwrap();
        let mut cp = Checkpoint::capture(&net, None);
        cp.format = "something-else/9".into();
        assert!(matches!(cp.restore(), Err(Error::Contract(_))));
    }
}
