use anyhow::Result;
use serde::{Deserialize, Serialize};
use symlab::ising::{energy_landscape, IsingParams};
use symlab::Prng;

use crate::run::{create, RunContext};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsingConfig {
    pub side: usize,
    pub count: usize,
    pub j: f64,
    /// One landscape per field value.
    pub fields: Vec<f64>,
    pub seed: u64,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            side: 5,
            count: 1000,
            j: 1.0,
            fields: vec![0.0, 0.45],
            seed: 0,
        }
    }
}

/// Writes `ising_h{h}.csv` per field, all from the same lattices.
pub fn run(ctx: &RunContext, side: Option<usize>, count: Option<usize>) -> Result<()> {
    let mut cfg: IsingConfig = ctx.load_config()?;
    cfg.side = side.unwrap_or(cfg.side);
    cfg.count = count.unwrap_or(cfg.count);
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    ctx.output_dir()?;
    let prng = Prng::new(cfg.seed);
    for &h in &cfg.fields {
        let land = energy_landscape(cfg.side, cfg.count, &IsingParams::new(cfg.j, h)?, &prng)?;
        land.write_csv(create(&ctx.path(&format!("ising_h{h}.csv")))?)?;
        eprintln!(
            "h = {h}: {} samples, {} distinct energies",
            cfg.count,
            land.distinct_levels(1e-9)
        );
    }
    ctx.snapshot("ising", &cfg)
}
