use serde::{Deserialize, Serialize};

use crate::group::Transform;
use crate::{Error, Result};

/// One layer of a sequential network. Images are channel-last `H × W × C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense { units: usize },
    /// Valid padding, stride 1, square kernel.
    Conv2d { filters: usize, kernel: usize },
    /// 2×2 window, stride 2, odd trailing rows/columns dropped.
    #[serde(rename = "maxpool2")]
    MaxPool2,
    Relu,
    Tanh,
    Sigmoid,
    Softplus,
    /// Normalizes over every axis but the last.
    #[serde(rename = "batchnorm2d")]
    BatchNorm2d,
    /// Inverted dropout.
    Dropout { rate: f64 },
    Flatten,
    /// Train mode only: applies `transform` to a random half of the batch.
    Augment { transform: Transform },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2 => "maxpool2",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Softplus => "softplus",
            LayerSpec::BatchNorm2d => "batchnorm2d",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Augment { .. } => "augment",
        }
    }

    /// Output item shape for a given input item shape.
    pub fn output_shape(&self, layer: usize, input: &[usize]) -> Result<Vec<usize>> {
        let fail = |message: String| Error::LayerShape { layer, message };
        match *self {
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(fail("dense layer needs at least one unit".into()));
                }
                if input.len() != 1 {
                    return Err(fail(format!(
                        "dense expects a flat input, got {input:?}; insert a flatten layer"
                    )));
                }
                Ok(vec![units])
            }
            LayerSpec::Conv2d { filters, kernel } => {
                if filters == 0 || kernel == 0 {
                    return Err(fail("conv2d needs filters >= 1 and kernel >= 1".into()));
                }
                match *input {
                    [h, w, _] if h >= kernel && w >= kernel => {
                        Ok(vec![h - kernel + 1, w - kernel + 1, filters])
                    }
                    _ => Err(fail(format!(
                        "conv2d with kernel {kernel} needs an H×W×C input with H, W >= {kernel}, got {input:?}"
                    ))),
                }
            }
            LayerSpec::MaxPool2 => match *input {
                [h, w, c] if h >= 2 && w >= 2 => Ok(vec![h / 2, w / 2, c]),
                _ => Err(fail(format!(
                    "maxpool2 needs an H×W×C input with H, W >= 2, got {input:?}"
                ))),
            },
            LayerSpec::BatchNorm2d => {
                if input.len() != 3 && input.len() != 1 {
                    return Err(fail(format!(
                        "batchnorm2d expects H×W×C or C, got {input:?}"
                    )));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(fail(format!("dropout rate must be in [0, 1), got {rate}")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Augment { transform } => match *input {
                [h, w] | [h, w, _] => {
                    if transform.needs_square() && h != w {
                        return Err(fail(format!("{transform} needs square images, got {input:?}")));
                    }
                    Ok(input.to_vec())
                }
                _ => Err(fail(format!("augment expects an image input, got {input:?}"))),
            },
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid | LayerSpec::Softplus => {
                Ok(input.to_vec())
            }
        }
    }

    /// Named trainable tensors as `(name, shape)`, given the input item shape.
    pub fn param_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { units } => {
                vec![("weight", vec![input[0], units]), ("bias", vec![units])]
            }
            LayerSpec::Conv2d { filters, kernel } => vec![
                ("weight", vec![kernel, kernel, input[2], filters]),
                ("bias", vec![filters]),
            ],
            LayerSpec::BatchNorm2d => {
                let c = *input.last().expect("validated shape");
                vec![("gamma", vec![c]), ("beta", vec![c])]
            }
            _ => Vec::new(),
        }
    }

    /// Non-trainable state (batchnorm running statistics).
    pub fn buffer_shapes(&self, input: &[usize]) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::BatchNorm2d => {
                let c = *input.last().expect("validated shape");
                vec![("running_mean", vec![c]), ("running_var", vec![c])]
            }
            _ => Vec::new(),
        }
    }

    pub fn fan_in(&self, input: &[usize]) -> usize {
        match *self {
            LayerSpec::Dense { .. } => input[0],
            LayerSpec::Conv2d { kernel, .. } => kernel * kernel * input[2],
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over the batch of `−log softmax(logits)[label]`.
    SoftmaxCrossEntropy,
    /// Mean over every output element of the squared error.
    MeanSquaredError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>, loss: LossKind) -> Self {
        Self {
            input_shape,
            layers,
            loss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let spec = NetworkSpec::new(
            vec![4, 4, 1],
            vec![
                LayerSpec::Augment {
                    transform: Transform::HFlip,
                },
                LayerSpec::Conv2d {
                    filters: 2,
                    kernel: 3,
                },
                LayerSpec::BatchNorm2d,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Dense { units: 2 },
            ],
            LossKind::SoftmaxCrossEntropy,
        );
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""kind":"maxpool2""#));
        assert!(text.contains(r#""kind":"batchnorm2d""#));
        let back: NetworkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"kind":"dense","units":3,"activation":"relu"}"#;
        assert!(serde_json::from_str::<LayerSpec>(bad).is_err());
    }

    #[test]
    fn conv_and_pool_shapes() {
        let conv = LayerSpec::Conv2d {
            filters: 8,
            kernel: 3,
        };
        assert_eq!(conv.output_shape(0, &[10, 10, 1]).unwrap(), vec![8, 8, 8]);
        assert_eq!(LayerSpec::MaxPool2.output_shape(1, &[5, 5, 8]).unwrap(), vec![2, 2, 8]);
        match LayerSpec::MaxPool2.output_shape(3, &[1, 1, 16]) {
            Err(Error::LayerShape { layer: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
