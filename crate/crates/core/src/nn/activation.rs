use ndarray::{Array2, Zip};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;
pub const RRELU_LOWER: f64 = 1.0 / 8.0;
pub const RRELU_UPPER: f64 = 1.0 / 3.0;
/// Mean of the rrelu slope interval, used in eval mode (11/48).
pub const RRELU_EVAL_SLOPE: f64 = (RRELU_LOWER + RRELU_UPPER) / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    /// Randomized leaky relu: negative slope drawn per element in train mode.
    Rrelu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leaky_relu",
            Activation::Rrelu => "rrelu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "leaky_relu" => Some(Activation::LeakyRelu),
            "rrelu" => Some(Activation::Rrelu),
            "sigmoid" => Some(Activation::Sigmoid),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }

    /// Applies the activation to `pre`. Returns the activated values and, for
    /// rrelu in train mode, the sampled negative slopes.
    pub(crate) fn apply(self, pre: &Array2<f64>, mode: &mut Mode<'_>) -> (Array2<f64>, Option<Array2<f64>>) {
        match self {
            Activation::Linear => (pre.clone(), None),
            Activation::Sigmoid => (pre.mapv(sigmoid), None),
            Activation::LeakyRelu => (pre.mapv(|z| leaky(z, LEAKY_RELU_SLOPE)), None),
            Activation::Rrelu => match mode {
                Mode::Eval => (pre.mapv(|z| leaky(z, RRELU_EVAL_SLOPE)), None),
                Mode::Train(rng) => {
                    let slopes = Array2::from_shape_fn(pre.raw_dim(), |_| {
                        rng.random_range(RRELU_LOWER..RRELU_UPPER)
                    });
                    let mut out = pre.clone();
                    Zip::from(&mut out).and(&slopes).for_each(|z, &s| *z = leaky(*z, s));
                    (out, Some(slopes))
                }
            },
        }
    }

    /// Multiplies `grad` in place by the activation derivative.
    pub(crate) fn chain(
        self,
        grad: &mut Array2<f64>,
        pre: &Array2<f64>,
        post: &Array2<f64>,
        slopes: Option<&Array2<f64>>,
    ) {
        match self {
            Activation::Linear => {}
            Activation::Sigmoid => {
                Zip::from(grad).and(post).for_each(|g, &s| *g *= s * (1.0 - s));
            }
            Activation::LeakyRelu => {
                Zip::from(grad).and(pre).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g *= LEAKY_RELU_SLOPE
                    }
                });
            }
            Activation::Rrelu => match slopes {
                Some(slopes) => Zip::from(grad).and(pre).and(slopes).for_each(|g, &z, &s| {
                    if z <= 0.0 {
                        *g *= s
                    }
                }),
                None => Zip::from(grad).and(pre).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g *= RRELU_EVAL_SLOPE
                    }
                }),
            },
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Forward-pass mode. Only rrelu behaves differently between the two.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

#[inline]
fn leaky(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
