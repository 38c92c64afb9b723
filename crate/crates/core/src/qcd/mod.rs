//! Quasi-particle equation of state for the QCD plasma.
//!
//! Gluons, light quarks and strange quarks are ideal gases of particles
//! with temperature-dependent masses. Natural units, GeV throughout.

mod fit;
#[cfg(test)]
mod tests;

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{LayerSpec, LossKind, Network, NetworkSpec, ParamState};
use crate::expansion::{expand_vector, VectorPattern};
use crate::numerics::{integrate_semi_infinite, QuadratureRule, Tensor};
use crate::{Error, Result};

pub use fit::{fit_mass_models, fit_report, FitConfig, FitReport, FitResult, FitRow};

/// Critical temperature used as the extra input in expanded mode.
pub const T_C: f64 = 0.155;
/// Quadrature scale in units of `T`.
pub const QUAD_SCALE_PER_T: f64 = 5.0;
/// Default Gauss–Legendre order.
pub const DEFAULT_NODES: usize = 50;
/// Default central-difference step as a fraction of `T`.
pub const DEFAULT_DT_FRACTION: f64 = 1.0 / 200.0;

/// Internal degrees of freedom.
pub struct DofConstants;

impl DofConstants {
    pub const GLUON: f64 = 16.0;
    pub const STRANGE: f64 = 12.0;
    pub const LIGHT: f64 = 24.0;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Boson,
    Fermion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Gluon,
    Light,
    Strange,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Gluon, Species::Light, Species::Strange];

    pub fn dof(self) -> f64 {
        match self {
            Species::Gluon => DofConstants::GLUON,
            Species::Light => DofConstants::LIGHT,
            Species::Strange => DofConstants::STRANGE,
        }
    }

    pub fn statistics(self) -> Statistics {
        match self {
            Species::Gluon => Statistics::Boson,
            _ => Statistics::Fermion,
        }
    }
}

fn check_mt(m: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {t}")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!("mass must be non-negative, got {m}")));
    }
    Ok(())
}

/// `ln(1 ∓ e^{−x})` with the sign of the statistics, both as the positive
/// contribution to `ln Z`.
fn log_term(stat: Statistics, x: f64) -> f64 {
    match stat {
        Statistics::Boson => -(-(-x).exp_m1()).ln(),
        Statistics::Fermion => (-x).exp().ln_1p(),
    }
}

/// Occupation `1/(e^x ∓ 1)`.
fn occupation(stat: Statistics, x: f64) -> f64 {
    match stat {
        Statistics::Boson => 1.0 / x.exp_m1(),
        Statistics::Fermion => 1.0 / (x.exp() + 1.0),
    }
}

/// `ln Z / V` for one species.
pub fn lnz(stat: Statistics, m: f64, t: f64, d: f64, rule: &QuadratureRule) -> Result<f64> {
    check_mt(m, t)?;
    let pref = d / (2.0 * PI * PI);
    let integral = integrate_semi_infinite(
        |p| p * p * log_term(stat, (p * p + m * m).sqrt() / t),
        rule,
        QUAD_SCALE_PER_T * t,
    )?;
    Ok(pref * integral)
}

/// `ln Z / V = −(d/2π²) ∫ p² ln(1 − e^{−E/T}) dp`.
pub fn lnz_boson(m: f64, t: f64, d: f64, rule: &QuadratureRule) -> Result<f64> {
    lnz(Statistics::Boson, m, t, d, rule)
}

/// `ln Z / V = (d/2π²) ∫ p² ln(1 + e^{−E/T}) dp`.
pub fn lnz_fermion(m: f64, t: f64, d: f64, rule: &QuadratureRule) -> Result<f64> {
    lnz(Statistics::Fermion, m, t, d, rule)
}

/// `∂(ln Z/V)/∂m = −(d/2π²)(m/T) ∫ p² n(E)/E dp`.
pub fn lnz_mass_derivative(
    stat: Statistics,
    m: f64,
    t: f64,
    d: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_mt(m, t)?;
    if m == 0.0 {
        return Ok(0.0);
    }
    let pref = d / (2.0 * PI * PI);
    let integral = integrate_semi_infinite(
        |p| {
            let e = (p * p + m * m).sqrt();
            p * p * occupation(stat, e / t) / e
        },
        rule,
        QUAD_SCALE_PER_T * t,
    )?;
    Ok(-pref * m / t * integral)
}

/// Energy density of a fixed-mass gas, `(d/2π²) ∫ p² E n(E) dp`.
///
/// Only valid when the mass does not depend on `T`.
pub fn energy_density_fixed_mass(
    stat: Statistics,
    m: f64,
    t: f64,
    d: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_mt(m, t)?;
    let pref = d / (2.0 * PI * PI);
    let integral = integrate_semi_infinite(
        |p| {
            let e = (p * p + m * m).sqrt();
            p * p * e * occupation(stat, e / t)
        },
        rule,
        QUAD_SCALE_PER_T * t,
    )?;
    Ok(pref * integral)
}

/// How a mass network sees the temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMode {
    /// `[T]`.
    Raw,
    /// `[T, T_c]`.
    Expanded { tc: f64 },
}

impl InputMode {
    pub fn expanded() -> Self {
        InputMode::Expanded { tc: T_C }
    }

    pub fn width(&self) -> usize {
        match self {
            InputMode::Raw => 1,
            InputMode::Expanded { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputMode::Raw => "raw",
            InputMode::Expanded { .. } => "expanded",
        }
    }

    /// One input row per temperature, stacked as `[N, width]`.
    pub fn batch(&self, temps: &[f64]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(temps.len() * self.width());
        for &t in temps {
            match *self {
                InputMode::Raw => data.push(t),
                InputMode::Expanded { tc } => {
                    data.extend(expand_vector(&[t], &[tc], &VectorPattern::Append)?)
                }
            }
        }
        Tensor::new(vec![temps.len(), self.width()], data)
    }
}

/// Dense sigmoid network ending in softplus, so masses are positive.
pub fn mass_network_spec(mode: InputMode, hidden: usize) -> NetworkSpec {
    NetworkSpec::new(
        vec![mode.width()],
        vec![
            LayerSpec::Dense { units: hidden },
            LayerSpec::Sigmoid,
            LayerSpec::Dense { units: hidden },
            LayerSpec::Sigmoid,
            LayerSpec::Dense { units: 1 },
            LayerSpec::Softplus,
        ],
        LossKind::MeanSquaredError,
    )
}

/// `m(T)` in GeV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MassModel {
    Constant {
        mass: f64,
    },
    /// Piecewise-linear in `T`; temperatures strictly ascending.
    Table {
        temps: Vec<f64>,
        masses: Vec<f64>,
    },
    Mlp {
        network: NetworkSpec,
        params: ParamState,
        input: InputMode,
    },
}

impl MassModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MassModel::Constant { mass } => check_mt(*mass, 1.0),
            MassModel::Table { temps, masses } => {
                if temps.len() < 2 || temps.len() != masses.len() {
                    return Err(Error::invalid(
                        "mass table needs at least two (T, m) pairs of equal length",
                    ));
                }
                if temps.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("mass table temperatures must ascend"));
                }
                masses.iter().try_for_each(|&m| check_mt(m, 1.0))
            }
            MassModel::Mlp { network, input, .. } => {
                if network.input_shape != [input.width()] {
                    return Err(Error::invalid(format!(
                        "mass network input {:?} does not match {} mode",
                        network.input_shape,
                        input.name()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Masses at each temperature, clamped at zero.
    pub fn masses(&self, temps: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            MassModel::Constant { mass } => Ok(vec![*mass; temps.len()]),
            MassModel::Table { temps: ts, masses } => temps
                .iter()
                .map(|&t| interpolate(ts, masses, t))
                .collect(),
            MassModel::Mlp {
                network,
                params,
                input,
            } => {
                let net = Network::new(network.clone())?;
                let out = net.predict(params, &input.batch(temps)?)?;
                Ok(out.data().iter().map(|m| m.max(0.0)).collect())
            }
        }
    }

    pub fn mass(&self, t: f64) -> Result<f64> {
        Ok(self.masses(&[t])?[0])
    }
}

fn interpolate(ts: &[f64], ms: &[f64], t: f64) -> Result<f64> {
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    if !(t >= lo && t <= hi) {
        return Err(Error::invalid(format!(
            "T = {t} outside the mass table range [{lo}, {hi}]"
        )));
    }
    let k = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
    let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    Ok(ms[k - 1] + w * (ms[k] - ms[k - 1]))
}

/// One mass model per species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassModels {
    pub gluon: MassModel,
    pub light: MassModel,
    pub strange: MassModel,
}

impl MassModels {
    pub fn constant(gluon: f64, light: f64, strange: f64) -> Self {
        Self {
            gluon: MassModel::Constant { mass: gluon },
            light: MassModel::Constant { mass: light },
            strange: MassModel::Constant { mass: strange },
        }
    }

    pub fn massless() -> Self {
        Self::constant(0.0, 0.0, 0.0)
    }

    pub fn get(&self, s: Species) -> &MassModel {
        match s {
            Species::Gluon => &self.gluon,
            Species::Light => &self.light,
            Species::Strange => &self.strange,
        }
    }
}

/// Total `ln Z / V` at each temperature.
pub fn total_lnz(temps: &[f64], models: &MassModels, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let mut total = vec![0.0; temps.len()];
    for s in Species::ALL {
        let masses = models.get(s).masses(temps)?;
        for ((acc, &t), &m) in total.iter_mut().zip(temps).zip(&masses) {
            *acc += lnz(s.statistics(), m, t, s.dof(), rule)?;
        }
    }
    Ok(total)
}

/// A point on the equation of state. `s = (ε + P)/T` is checked on
/// construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermoPoint {
    t: f64,
    p: f64,
    eps: f64,
    s: f64,
}

/// Relative tolerance of the entropy identity.
pub const ENTROPY_TOL: f64 = 1e-10;

impl ThermoPoint {
    pub fn new(t: f64, p: f64, eps: f64, s: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {t}")));
        }
        if ![p, eps, s].iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalDomain {
                message: "non-finite thermodynamic value".into(),
                at: t,
            });
        }
        let expected = (eps + p) / t;
        if (s - expected).abs() > ENTROPY_TOL * expected.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!(
                "entropy {s} violates s = (eps + P)/T = {expected} at T = {t}"
            )));
        }
        Ok(Self { t, p, eps, s })
    }

    /// Derives `s` from the identity.
    pub fn from_pressure_energy(t: f64, p: f64, eps: f64) -> Result<Self> {
        Self::new(t, p, eps, (eps + p) / t)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn pressure(&self) -> f64 {
        self.p
    }

    pub fn energy_density(&self) -> f64 {
        self.eps
    }

    pub fn entropy_density(&self) -> f64 {
        self.s
    }

    pub fn p_over_t4(&self) -> f64 {
        self.p / self.t.powi(4)
    }

    pub fn eps_over_t4(&self) -> f64 {
        self.eps / self.t.powi(4)
    }

    pub fn s_over_t3(&self) -> f64 {
        self.s / self.t.powi(3)
    }
}

/// `P = T ln Z/V`, `ε = T² d(ln Z/V)/dT` by central difference with step
/// `dt` (default `T/200`), `s = (ε + P)/T`.
pub fn eos_point(
    t: f64,
    models: &MassModels,
    rule: &QuadratureRule,
    dt: Option<f64>,
) -> Result<ThermoPoint> {
    let dt = dt.unwrap_or(t * DEFAULT_DT_FRACTION);
    if !(dt > 0.0 && t - dt > 0.0) {
        return Err(Error::invalid(format!("need 0 < dT < T, got T = {t}, dT = {dt}")));
    }
    let z = total_lnz(&[t - dt, t, t + dt], models, rule)?;
    let p = t * z[1];
    let eps = t * t * (z[2] - z[0]) / (2.0 * dt);
    ThermoPoint::from_pressure_energy(t, p, eps)
}

/// `eos_point` over a temperature grid, in parallel; `dt = T·dt_fraction`.
pub fn eos_table(
    temps: &[f64],
    models: &MassModels,
    rule: &QuadratureRule,
    dt_fraction: f64,
) -> Result<Vec<ThermoPoint>> {
    temps
        .par_iter()
        .map(|&t| eos_point(t, models, rule, Some(t * dt_fraction)))
        .collect()
}

/// `n` evenly spaced temperatures from `lo` to `hi` inclusive.
pub fn temperature_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid(format!(
            "temperature grid needs 0 < lo < hi and n >= 2, got [{lo}, {hi}], n = {n}"
        )));
    }
    Ok((0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect())
}

/// Stand-in lattice table from known mass models.
pub fn synthetic_target(
    models: &MassModels,
    temps: &[f64],
    rule: &QuadratureRule,
) -> Result<Vec<ThermoPoint>> {
    eos_table(temps, models, rule, DEFAULT_DT_FRACTION)
}

#[derive(Serialize, Deserialize)]
struct EosRecord {
    #[serde(rename = "T_GeV")]
    t: f64,
    #[serde(rename = "P_over_T4")]
    p_over_t4: f64,
    #[serde(rename = "eps_over_T4")]
    eps_over_t4: f64,
    #[serde(rename = "s_over_T3", default)]
    s_over_t3: Option<f64>,
}

/// Relative tolerance for a supplied `s/T³` column when reading.
pub const CSV_ENTROPY_TOL: f64 = 1e-6;

pub fn write_eos_csv<W: Write>(points: &[ThermoPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for pt in points {
        w.serialize(EosRecord {
            t: pt.t,
            p_over_t4: pt.p_over_t4(),
            eps_over_t4: pt.eps_over_t4(),
            s_over_t3: Some(pt.s_over_t3()),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `T_GeV, P_over_T4, eps_over_T4[, s_over_T3]`. When the entropy
/// column is present it must agree with the identity to
/// [`CSV_ENTROPY_TOL`].
pub fn read_eos_csv<R: Read>(input: R) -> Result<Vec<ThermoPoint>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut points = Vec::new();
    for record in reader.deserialize() {
        let r: EosRecord = record?;
        let t4 = r.t.powi(4);
        let pt = ThermoPoint::from_pressure_energy(r.t, r.p_over_t4 * t4, r.eps_over_t4 * t4)?;
        if let Some(s) = r.s_over_t3 {
            let expected = pt.s_over_t3();
            if (s - expected).abs() > CSV_ENTROPY_TOL * expected.abs().max(1e-300) {
                return Err(Error::invalid(format!(
                    "s_over_T3 = {s} at T = {} disagrees with (eps + P)/T^4 = {expected}",
                    r.t
                )));
            }
        }
        points.push(pt);
    }
    Ok(points)
}
