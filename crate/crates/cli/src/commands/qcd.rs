use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use symlab::numerics::gauss_legendre;
use symlab::qcd::{
    eos_table, fit_report, read_eos_csv, synthetic_target, temperature_grid, write_eos_csv,
    FitConfig, MassModels, DEFAULT_DT_FRACTION, DEFAULT_NODES,
};

use crate::run::{create, usage, write_json, RunContext};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EosConfig {
    pub grid: TemperatureGrid,
    pub masses: MassModels,
    pub nodes: usize,
    pub dt_fraction: f64,
}

impl Default for EosConfig {
    fn default() -> Self {
        Self {
            grid: TemperatureGrid {
                t_min: 0.1,
                t_max: 0.5,
                points: 41,
            },
            masses: MassModels::constant(0.6, 0.3, 0.4),
            nodes: DEFAULT_NODES,
            dt_fraction: DEFAULT_DT_FRACTION,
        }
    }
}

/// Writes `eos.csv`.
pub fn eos(ctx: &RunContext) -> Result<()> {
    let cfg: EosConfig = ctx.load_config()?;
    let rule = gauss_legendre(cfg.nodes)?;
    let temps = temperature_grid(cfg.grid.t_min, cfg.grid.t_max, cfg.grid.points)?;
    let points = eos_table(&temps, &cfg.masses, &rule, cfg.dt_fraction)?;
    ctx.output_dir()?;
    write_eos_csv(&points, create(&ctx.path("eos.csv"))?)?;
    ctx.snapshot("qcd eos", &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitRunConfig {
    /// Target EoS CSV; without one, `synthetic` generates the target.
    pub target: Option<PathBuf>,
    pub synthetic: SyntheticTarget,
    pub fit: FitConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTarget {
    pub masses: MassModels,
    pub grid: TemperatureGrid,
}

impl Default for FitRunConfig {
    fn default() -> Self {
        Self {
            target: None,
            synthetic: SyntheticTarget {
                masses: MassModels::constant(0.6, 0.3, 0.4),
                grid: TemperatureGrid {
                    t_min: 0.1,
                    t_max: 0.5,
                    points: 17,
                },
            },
            fit: FitConfig::default(),
        }
    }
}

#[derive(Serialize)]
struct MaeRow {
    #[serde(rename = "T_GeV")]
    t: f64,
    raw_abs_error: f64,
    expanded_abs_error: f64,
}

/// Fits raw and expanded mass models; writes `fit_report.json`,
/// `mae.csv` and the `target.csv` that was fitted.
pub fn fit(ctx: &RunContext, target_flag: Option<PathBuf>) -> Result<()> {
    let mut cfg: FitRunConfig = ctx.load_config()?;
    if target_flag.is_some() {
        cfg.target = target_flag;
    }
    cfg.fit.seed = ctx.seed.unwrap_or(cfg.fit.seed);
    let target = match &cfg.target {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| usage(format!("cannot open target {}: {e}", path.display())))?;
            read_eos_csv(file).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            let g = &cfg.synthetic.grid;
            let temps = temperature_grid(g.t_min, g.t_max, g.points)?;
            synthetic_target(&cfg.synthetic.masses, &temps, &gauss_legendre(cfg.fit.nodes)?)?
        }
    };
    let report = fit_report(&target, &cfg.fit)?;
    ctx.output_dir()?;
    write_eos_csv(&target, create(&ctx.path("target.csv"))?)?;
    write_json(&ctx.path("fit_report.json"), &report)?;
    let mut w = csv::Writer::from_writer(create(&ctx.path("mae.csv"))?);
    for (r, e) in report.raw.rows.iter().zip(&report.expanded.rows) {
        w.serialize(MaeRow {
            t: r.t,
            raw_abs_error: r.abs_error_p,
            expanded_abs_error: e.abs_error_p,
        })?;
    }
    w.flush()?;
    for r in [&report.raw, &report.expanded] {
        eprintln!(
            "{}: MAE(P/T^4) {:.3e}, MAE(eps/T^4) {:.3e}, clamped {}",
            r.mode.name(),
            r.mae_p_over_t4,
            r.mae_eps_over_t4,
            r.clamped
        );
    }
    ctx.snapshot("qcd fit", &cfg)
}
