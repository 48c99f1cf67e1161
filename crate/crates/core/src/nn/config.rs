use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    S2Conv {
        b_in: usize,
        b_out: usize,
        k_in: usize,
        k_out: usize,
    },
    So3Conv {
        b_in: usize,
        b_out: usize,
        k_in: usize,
        k_out: usize,
    },
    /// Pointwise ReLU on the SO(3) grid samples.
    Relu,
    Linear {
        dim_in: usize,
        dim_out: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::S2Conv { .. } => "s2_conv",
            LayerSpec::So3Conv { .. } => "so3_conv",
            LayerSpec::Relu => "relu",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// How the last SO(3) feature map becomes the vector fed to the first
/// Linear layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// All grid samples, channel-major.
    #[default]
    Spatial,
    /// The mean over SO(3) of each channel (its `l = 0` coefficient), which is
    /// invariant to input rotations.
    Invariant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub head: Head,
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ModelConfig {
    /// `S2Conv – ReLU – SO3Conv – ReLU – Linear – Softmax` with bandwidths
    /// `b[0] → b[1] → b[2]`, conv channels `k[0], k[1]` and `classes` outputs.
    pub fn s2_so3_classifier(b: [usize; 3], k: [usize; 2], classes: usize, head: Head, seed: u64) -> Self {
        let features = match head {
            Head::Spatial => k[1] * 8 * b[2] * b[2] * b[2],
            Head::Invariant => k[1],
        };
        ModelConfig {
            layers: vec![
                LayerSpec::S2Conv {
                    b_in: b[0],
                    b_out: b[1],
                    k_in: 1,
                    k_out: k[0],
                },
                LayerSpec::Relu,
                LayerSpec::So3Conv {
                    b_in: b[1],
                    b_out: b[2],
                    k_in: k[0],
                    k_out: k[1],
                },
                LayerSpec::Relu,
                LayerSpec::Linear {
                    dim_in: features,
                    dim_out: classes,
                },
                LayerSpec::Softmax,
            ],
            head,
            seed,
            train: TrainConfig::default(),
        }
    }

    pub fn input_bandwidth(&self) -> Result<usize> {
        match self.layers.first() {
            Some(LayerSpec::S2Conv { b_in, .. }) => Ok(*b_in),
            _ => Err(Error::Config("first layer must be s2_conv".into())),
        }
    }

    pub fn input_channels(&self) -> Result<usize> {
        match self.layers.first() {
            Some(LayerSpec::S2Conv { k_in, .. }) => Ok(*k_in),
            _ => Err(Error::Config("first layer must be s2_conv".into())),
        }
    }

    /// Number of classes produced by the final Softmax.
    pub fn classes(&self) -> Result<usize> {
        self.validate()?;
        match self.layers[self.layers.len() - 2] {
            LayerSpec::Linear { dim_out, .. } => Ok(dim_out),
            _ => unreachable!("validated"),
        }
    }

    /// Checks that adjacent layers agree on shapes.
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, msg: String| Err(Error::Config(format!("layer {i}: {msg}")));
        self.input_bandwidth()?;
        // Feature map `(b, k)` until the first Linear, then a vector length.
        let mut map: Option<(usize, usize)> = None;
        let mut vector: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i + 1 == self.layers.len();
            match *layer {
                LayerSpec::S2Conv {
                    b_in,
                    b_out,
                    k_in,
                    k_out,
                } => {
                    if i != 0 {
                        return bad(i, "s2_conv must be the first layer".into());
                    }
                    if b_out == 0 || b_out > b_in || b_in > crate::gft::MAX_BANDWIDTH || k_in == 0 || k_out == 0 {
                        return bad(i, format!("invalid s2_conv shape {b_in}->{b_out}, {k_in}->{k_out}"));
                    }
                    map = Some((b_out, k_out));
                }
                LayerSpec::So3Conv {
                    b_in,
                    b_out,
                    k_in,
                    k_out,
                } => {
                    if map != Some((b_in, k_in)) {
                        return bad(i, format!("so3_conv expects input {:?}, got ({b_in}, {k_in})", map));
                    }
                    if b_out == 0 || b_out > b_in || k_out == 0 {
                        return bad(i, format!("invalid so3_conv shape {b_in}->{b_out}, {k_in}->{k_out}"));
                    }
                    map = Some((b_out, k_out));
                }
                LayerSpec::Relu => {
                    if vector.is_some() || map.is_none() {
                        return bad(i, "relu acts on SO(3) feature maps only".into());
                    }
                }
                LayerSpec::Linear { dim_in, dim_out } => {
                    let expected = match (vector, map) {
                        (Some(d), _) => d,
                        (None, Some((b, k))) => match self.head {
                            Head::Spatial => k * 8 * b * b * b,
                            Head::Invariant => k,
                        },
                        (None, None) => unreachable!("first layer checked"),
                    };
                    if dim_in != expected || dim_out == 0 {
                        return bad(i, format!("linear expects dim_in {expected}, got {dim_in}->{dim_out}"));
                    }
                    vector = Some(dim_out);
                }
                LayerSpec::Softmax => {
                    if !last {
                        return bad(i, "softmax must be the last layer".into());
                    }
                    match vector {
                        Some(d) if d >= 2 => {}
                        _ => return bad(i, "softmax needs a preceding linear layer with >= 2 outputs".into()),
                    }
                }
            }
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::Config("last layer must be softmax".into()));
        }
        let t = &self.train;
        if !(t.learning_rate > 0.0)
            || t.batch_size == 0
            || !(0.0..1.0).contains(&t.beta1)
            || !(0.0..1.0).contains(&t.beta2)
        {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifier_config_validates() {
        let c = ModelConfig::s2_so3_classifier([10, 5, 3], [20, 30], 10, Head::Spatial, 1);
        c.validate().unwrap();
        assert_eq!(c.classes().unwrap(), 10);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), c);
        ModelConfig::s2_so3_classifier([10, 5, 3], [20, 30], 10, Head::Invariant, 1)
            .validate()
            .unwrap();
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut c = ModelConfig::s2_so3_classifier([8, 4, 2], [3, 4], 10, Head::Spatial, 1);
        c.layers[2] = LayerSpec::So3Conv {
            b_in: 3,
            b_out: 2,
            k_in: 3,
            k_out: 4,
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ModelConfig::s2_so3_classifier([8, 4, 2], [3, 4], 10, Head::Spatial, 1);
        c.layers.pop();
        assert!(c.validate().is_err());
        let mut c = ModelConfig::s2_so3_classifier([8, 4, 2], [3, 4], 10, Head::Spatial, 1);
        c.layers.swap(0, 1);
        assert!(c.validate().is_err());
        let mut c = ModelConfig::s2_so3_classifier([8, 4, 2], [3, 4], 10, Head::Spatial, 1);
        c.layers.insert(5, LayerSpec::Softmax);
        assert!(c.validate().is_err());
    }
}
