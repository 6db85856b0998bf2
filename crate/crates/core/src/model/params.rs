//! Named parameter store. Every parameter path and shape is a pure
//! function of the model configuration.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::{Fill, Tensor};

/// What a parameter is, which decides its initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Convolution or embedding weight: Xavier-uniform.
    Weight,
    /// Bias or layer-norm offset: zero.
    Zero,
    /// Layer-norm gain: one.
    One,
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

/// Parameter paths and shapes in deterministic construction order
/// (also the initialization and checkpoint-manifest order).
pub fn parameter_specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let c = config.channels;
    let (h, w) = (config.feat_h(), config.feat_w());
    let lifted = config.c0 * config.patch * config.patch;
    let mut specs = Vec::new();

    let mut push = |path: String, shape: Vec<usize>, kind: ParamKind| {
        specs.push(ParamSpec { path, shape, kind });
    };

    push("stem.conv1.weight".into(), vec![c, lifted, 3, 3], ParamKind::Weight);
    push("stem.conv1.bias".into(), vec![c], ParamKind::Zero);
    push("stem.conv2.weight".into(), vec![c, c, 3, 3], ParamKind::Weight);
    push("stem.conv2.bias".into(), vec![c], ParamKind::Zero);
    push(
        "time_embed.weight".into(),
        vec![config.m + config.n, c],
        ParamKind::Weight,
    );

    let push_attn = |prefix: &str, specs: &mut Vec<ParamSpec>| {
        for proj in ["q", "k", "v", "o"] {
            specs.push(ParamSpec {
                path: format!("{prefix}.{proj}.weight"),
                shape: vec![c, c, 1, 1],
                kind: ParamKind::Weight,
            });
            specs.push(ParamSpec {
                path: format!("{prefix}.{proj}.bias"),
                shape: vec![c],
                kind: ParamKind::Zero,
            });
        }
    };
    let push_norm = |prefix: &str, specs: &mut Vec<ParamSpec>| {
        specs.push(ParamSpec {
            path: format!("{prefix}.gain"),
            shape: vec![c, h, w],
            kind: ParamKind::One,
        });
        specs.push(ParamSpec {
            path: format!("{prefix}.offset"),
            shape: vec![c, h, w],
            kind: ParamKind::Zero,
        });
    };
    let push_ffn = |prefix: &str, config: &ModelConfig, specs: &mut Vec<ParamSpec>| {
        let conv_shape = if config.use_lsb {
            vec![c, c, 3, 3, 3]
        } else {
            vec![c, c, 1, 1]
        };
        for layer in ["conv1", "conv2"] {
            specs.push(ParamSpec {
                path: format!("{prefix}.{layer}.weight"),
                shape: conv_shape.clone(),
                kind: ParamKind::Weight,
            });
            specs.push(ParamSpec {
                path: format!("{prefix}.{layer}.bias"),
                shape: vec![c],
                kind: ParamKind::Zero,
            });
        }
        if config.use_lsb {
            for norm in ["norm1", "norm2"] {
                specs.push(ParamSpec {
                    path: format!("{prefix}.{norm}.gain"),
                    shape: vec![c, h, w],
                    kind: ParamKind::One,
                });
                specs.push(ParamSpec {
                    path: format!("{prefix}.{norm}.offset"),
                    shape: vec![c, h, w],
                    kind: ParamKind::Zero,
                });
            }
        }
    };

    for i in 0..config.enc_blocks {
        if config.use_2dmha {
            push_attn(&format!("enc.{i}.attn"), &mut specs);
            push_norm(&format!("enc.{i}.attn_norm"), &mut specs);
        }
        push_ffn(&format!("enc.{i}.ffn"), config, &mut specs);
        push_norm(&format!("enc.{i}.ffn_norm"), &mut specs);
    }
    for i in 0..config.dec_blocks {
        if config.use_2dmha {
            if config.use_decoder_self_attn {
                push_attn(&format!("dec.{i}.self_attn"), &mut specs);
                push_norm(&format!("dec.{i}.self_norm"), &mut specs);
            }
            push_attn(&format!("dec.{i}.cross_attn"), &mut specs);
            push_norm(&format!("dec.{i}.cross_norm"), &mut specs);
        }
        push_ffn(&format!("dec.{i}.ffn"), config, &mut specs);
        push_norm(&format!("dec.{i}.ffn_norm"), &mut specs);
    }

    specs.push(ParamSpec {
        path: "head.conv.weight".into(),
        shape: vec![lifted, c, 3, 3],
        kind: ParamKind::Weight,
    });
    specs.push(ParamSpec {
        path: "head.conv.bias".into(),
        shape: vec![lifted],
        kind: ParamKind::Zero,
    });
    specs
}

fn xavier_bound(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match shape.len() {
        2 => (shape[0], shape[1]), // embedding table [rows, C]
        _ => {
            let rf: usize = shape[2..].iter().product();
            (shape[1] * rf, shape[0] * rf)
        }
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// The full set of trainable tensors, keyed by path.
#[derive(Clone)]
pub struct Parameters {
    map: BTreeMap<String, Tensor>,
}

impl std::fmt::Debug for Parameters {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parameters({} tensors, {} scalars)", self.len(), self.count())
    }
}

impl Parameters {
    /// Deterministic initialization from the configuration and seed
    /// stream: Xavier-uniform weights, zero biases/offsets, unit gains.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Parameters> {
        config.validate()?;
        let mut map = BTreeMap::new();
        for spec in parameter_specs(config) {
            let fill = match spec.kind {
                ParamKind::Weight => {
                    let b = xavier_bound(&spec.shape);
                    Fill::Uniform(-b, b)
                }
                ParamKind::Zero => Fill::Zeros,
                ParamKind::One => Fill::Ones,
            };
            let t = Tensor::build(&spec.shape, fill, Some(rng))?.requiring_grad();
            if map.insert(spec.path.clone(), t).is_some() {
                return Err(Error::invalid(format!("duplicate parameter {}", spec.path)));
            }
        }
        Ok(Parameters { map })
    }

    pub fn from_map(map: BTreeMap<String, Tensor>) -> Parameters {
        Parameters { map }
    }

    pub fn get(&self, path: &str) -> Result<&Tensor> {
        self.map
            .get(path)
            .ok_or_else(|| Error::MissingParameter(path.to_string()))
    }

    /// Iterate in lexicographic path order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.map.values().map(|t| t.numel()).sum()
    }

    pub fn clear_grads(&self) {
        for t in self.map.values() {
            t.clear_grad();
        }
    }
}
