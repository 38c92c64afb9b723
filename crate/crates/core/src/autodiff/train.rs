use serde::{Deserialize, Serialize};

use super::network::{Mode, Network, Targets};
use super::optim::{step, OptimizerConfig, OptimizerState};
use super::params::ParamState;
use crate::numerics::{stream, Prng, Tensor};
use crate::{Error, Result};

/// Largest network `gradient_check` accepts.
pub const GRADIENT_CHECK_MAX_PARAMS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean of the train-mode batch losses.
    pub loss: f64,
    /// Train-mode accuracy for classification losses.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamState,
    pub trace: Vec<EpochStats>,
}

/// Fraction of rows whose first maximal logit matches the label.
pub fn accuracy(outputs: &Tensor, labels: &[usize]) -> f64 {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(k, &label)| argmax(outputs.item(k)) == label)
        .count();
    hits as f64 / labels.len() as f64
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = j;
        }
    }
    best
}

fn check_data(net: &Network, inputs: &Tensor, targets: &Targets) -> Result<()> {
    if inputs.rank() < 2 || inputs.batch_len() == 0 {
        return Err(Error::invalid("training data is empty"));
    }
    if inputs.batch_len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} inputs but {} targets",
            inputs.batch_len(),
            targets.len()
        )));
    }
    if let Targets::Classes(labels) = targets {
        let classes = net.output_shape().iter().product::<usize>();
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
    }
    Ok(())
}

/// Trains from the seed-derived initialization.
pub fn train(
    net: &Network,
    inputs: &Tensor,
    targets: &Targets,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let params = net.init_params(&mut Prng::derive(config.seed, &[stream::INIT]));
    train_from(net, params, inputs, targets, config)
}

/// Trains starting from `params`.
pub fn train_from(
    net: &Network,
    mut params: ParamState,
    inputs: &Tensor,
    targets: &Targets,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_data(net, inputs, targets)?;
    let n = inputs.batch_len();
    let mut shuffle = Prng::derive(config.seed, &[stream::SHUFFLE]);
    let mut forward = Prng::derive(config.seed, &[stream::FORWARD]);
    let mut opt = OptimizerState::new(params.len());
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = shuffle.permutation(n);
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xb = inputs.gather(chunk)?;
            let tb = targets.gather(chunk)?;
            let g = net.backward(&params, &xb, &tb, &mut forward)?;
            if !g.loss.is_finite() || g.grads.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += g.loss * chunk.len() as f64;
            if let Targets::Classes(labels) = &tb {
                hits += accuracy(&g.outputs, labels) * chunk.len() as f64;
            }
            step(&config.optimizer, &mut opt, &mut params.values, &g.grads)?;
            params.buffers = g.buffers;
        }
        if params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        trace.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: matches!(targets, Targets::Classes(_)).then(|| hits / n as f64),
        });
    }
    Ok(TrainOutcome { params, trace })
}

/// Eval-mode loss and accuracy (accuracy only for class targets).
pub fn evaluate(
    net: &Network,
    params: &ParamState,
    inputs: &Tensor,
    targets: &Targets,
) -> Result<(f64, Option<f64>)> {
    check_data(net, inputs, targets)?;
    let out = net.predict(params, inputs)?;
    let (loss, _) = net.loss(&out, targets)?;
    let acc = match targets {
        Targets::Classes(labels) => Some(accuracy(&out, labels)),
        Targets::Values(_) => None,
    };
    Ok((loss, acc))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub worst_param: usize,
}

/// Compares analytic gradients with central differences, replaying the
/// same random stream (dropout masks, augmentation) for every evaluation.
pub fn gradient_check(
    net: &Network,
    params: &ParamState,
    batch: &Tensor,
    targets: &Targets,
    mode: Mode,
    eps: f64,
) -> Result<GradientCheck> {
    if net.param_count() > GRADIENT_CHECK_MAX_PARAMS {
        return Err(Error::invalid(format!(
            "gradient check is limited to {GRADIENT_CHECK_MAX_PARAMS} parameters, network has {}",
            net.param_count()
        )));
    }
    let rng = Prng::new(0x5eed);
    let trace = net.forward(params, batch, mode, &mut rng.clone())?;
    let (_, grad_out) = net.loss(trace.outputs(), targets)?;
    let analytic = net.backward_from(params, &trace, &grad_out)?;
    let loss_at = |p: &ParamState| -> Result<f64> {
        Ok(net.forward_loss(p, batch, targets, mode, &mut rng.clone())?.1)
    };
    let mut probe = params.clone();
    let mut worst = GradientCheck {
        max_rel_error: 0.0,
        worst_param: 0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.values[i];
        probe.values[i] = orig + eps;
        let up = loss_at(&probe)?;
        probe.values[i] = orig - eps;
        let down = loss_at(&probe)?;
        probe.values[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if err > worst.max_rel_error {
            worst = GradientCheck {
                max_rel_error: err,
                worst_param: i,
            };
        }
    }
    Ok(worst)
}
