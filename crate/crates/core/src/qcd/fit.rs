use serde::{Deserialize, Serialize};

use super::{
    eos_point, lnz, lnz_mass_derivative, mass_network_spec, InputMode, MassModel, MassModels,
    Species, ThermoPoint, DEFAULT_DT_FRACTION, DEFAULT_NODES,
};
use crate::autodiff::{step, Mode, Network, OptimizerConfig, OptimizerState, ParamState};
use crate::numerics::{gauss_legendre, stream, Prng, QuadratureRule, Tensor};
use crate::{Error, Result};

/// Joint fit of the three mass networks. Full-batch; `epochs = 0` returns
/// the initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
}

fn default_hidden() -> usize {
    32
}
fn default_nodes() -> usize {
    DEFAULT_NODES
}
fn default_dt_fraction() -> f64 {
    DEFAULT_DT_FRACTION
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::adam(0.01),
            epochs: 1500,
            seed: 0,
            hidden: default_hidden(),
            nodes: default_nodes(),
            dt_fraction: default_dt_fraction(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be >= 1"));
        }
        if !(self.dt_fraction > 0.0 && self.dt_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "dt_fraction must be in (0, 1), got {}",
                self.dt_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    #[serde(rename = "T_GeV")]
    pub t: f64,
    pub target_p_over_t4: f64,
    pub fitted_p_over_t4: f64,
    pub abs_error_p: f64,
    pub target_eps_over_t4: f64,
    pub fitted_eps_over_t4: f64,
    pub abs_error_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: InputMode,
    pub models: MassModels,
    /// Per-temperature errors of the fitted equation of state.
    pub rows: Vec<FitRow>,
    pub mae_p_over_t4: f64,
    pub mae_eps_over_t4: f64,
    /// Training loss before each update.
    pub loss_trace: Vec<f64>,
    /// Mass outputs clamped at zero over the whole run.
    pub clamped: usize,
}

/// Raw and expanded fits of one target under one budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub raw: FitResult,
    pub expanded: FitResult,
}

pub fn fit_report(target: &[ThermoPoint], config: &FitConfig) -> Result<FitReport> {
    Ok(FitReport {
        config: config.clone(),
        raw: fit_mass_models(target, InputMode::Raw, config)?,
        expanded: fit_mass_models(target, InputMode::expanded(), config)?,
    })
}

struct SpeciesNet {
    net: Network,
    params: ParamState,
    opt: OptimizerState,
}

fn check_target(target: &[ThermoPoint], dt_fraction: f64) -> Result<()> {
    if target.len() < 5 {
        return Err(Error::invalid(format!(
            "target needs at least 5 rows, got {}",
            target.len()
        )));
    }
    if target.windows(2).any(|w| !(w[0].t() < w[1].t())) {
        return Err(Error::invalid("target temperatures must ascend"));
    }
    if target[0].t() * (1.0 - dt_fraction) <= 0.0 {
        return Err(Error::invalid("dT reaches T = 0"));
    }
    Ok(())
}

/// Trains one mass network per species so the quasi-particle `P/T⁴` and
/// `ε/T⁴` match `target` in mean squared error, equally weighted.
pub fn fit_mass_models(
    target: &[ThermoPoint],
    mode: InputMode,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_target(target, config.dt_fraction)?;
    let rule = gauss_legendre(config.nodes)?;
    let n = target.len();
    // Three evaluation temperatures per row: T − dT, T, T + dT.
    let temps: Vec<f64> = target
        .iter()
        .flat_map(|pt| {
            let dt = pt.t() * config.dt_fraction;
            [pt.t() - dt, pt.t(), pt.t() + dt]
        })
        .collect();
    let inputs = mode.batch(&temps)?;
    let spec = mass_network_spec(mode, config.hidden);
    let mut species: Vec<SpeciesNet> = Species::ALL
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let net = Network::new(spec.clone())?;
            let params = net.init_params(&mut Prng::derive(config.seed, &[stream::INIT, k as u64]));
            let opt = OptimizerState::new(params.len());
            Ok(SpeciesNet { net, params, opt })
        })
        .collect::<Result<_>>()?;

    let mut clamped = 0;
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut dummy = Prng::new(config.seed);
    for epoch in 0..config.epochs {
        let mut traces = Vec::with_capacity(3);
        let mut dlnz_dm = Vec::with_capacity(3);
        let mut lnz_total = vec![0.0; temps.len()];
        for (s, sp) in Species::ALL.iter().zip(&species) {
            let trace = sp.net.forward(&sp.params, &inputs, Mode::Train, &mut dummy)?;
            let mut derivs = Vec::with_capacity(temps.len());
            for ((acc, &t), &raw) in lnz_total.iter_mut().zip(&temps).zip(trace.outputs().data()) {
                if !raw.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                let m = if raw < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    raw
                };
                *acc += lnz(s.statistics(), m, t, s.dof(), &rule)?;
                derivs.push(if raw < 0.0 {
                    0.0
                } else {
                    lnz_mass_derivative(s.statistics(), m, t, s.dof(), &rule)?
                });
            }
            traces.push(trace);
            dlnz_dm.push(derivs);
        }

        // dL/d(lnZ) at every evaluation temperature.
        let mut loss = 0.0;
        let mut dl_dz = vec![0.0; temps.len()];
        for (i, pt) in target.iter().enumerate() {
            let t = pt.t();
            let dt = t * config.dt_fraction;
            let z = &lnz_total[3 * i..3 * i + 3];
            let rp = z[1] / t.powi(3) - pt.p_over_t4();
            let re = (z[2] - z[0]) / (2.0 * dt * t * t) - pt.eps_over_t4();
            loss += 0.5 * (rp * rp + re * re) / n as f64;
            dl_dz[3 * i + 1] += rp / (n as f64 * t.powi(3));
            let de = re / (n as f64 * 2.0 * dt * t * t);
            dl_dz[3 * i + 2] += de;
            dl_dz[3 * i] -= de;
        }
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_trace.push(loss);

        for ((sp, trace), derivs) in species.iter_mut().zip(&traces).zip(&dlnz_dm) {
            let g: Vec<f64> = dl_dz.iter().zip(derivs).map(|(a, b)| a * b).collect();
            let grad_out = Tensor::new(vec![temps.len(), 1], g)?;
            let grads = sp.net.backward_from(&sp.params, trace, &grad_out)?;
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            step(&config.optimizer, &mut sp.opt, &mut sp.params.values, &grads)?;
            if sp.params.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
        }
    }

    let mut fitted = species.into_iter().map(|sp| MassModel::Mlp {
        network: spec.clone(),
        params: sp.params,
        input: mode,
    });
    let models = MassModels {
        gluon: fitted.next().expect("three species"),
        light: fitted.next().expect("three species"),
        strange: fitted.next().expect("three species"),
    };
    let rows = evaluate_fit(target, &models, &rule, config.dt_fraction)?;
    let mae = |f: fn(&FitRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    Ok(FitResult {
        mode,
        mae_p_over_t4: mae(|r| r.abs_error_p),
        mae_eps_over_t4: mae(|r| r.abs_error_eps),
        models,
        rows,
        loss_trace,
        clamped,
    })
}

/// Per-row absolute errors of `models` against `target`.
pub(crate) fn evaluate_fit(
    target: &[ThermoPoint],
    models: &MassModels,
    rule: &QuadratureRule,
    dt_fraction: f64,
) -> Result<Vec<FitRow>> {
    target
        .iter()
        .map(|pt| {
            let fit = eos_point(pt.t(), models, rule, Some(pt.t() * dt_fraction))?;
            Ok(FitRow {
                t: pt.t(),
                target_p_over_t4: pt.p_over_t4(),
                fitted_p_over_t4: fit.p_over_t4(),
                abs_error_p: (fit.p_over_t4() - pt.p_over_t4()).abs(),
                target_eps_over_t4: pt.eps_over_t4(),
                fitted_eps_over_t4: fit.eps_over_t4(),
                abs_error_eps: (fit.eps_over_t4() - pt.eps_over_t4()).abs(),
            })
        })
        .collect()
}
