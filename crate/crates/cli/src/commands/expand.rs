use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use symlab::expansion::{expand_batch, expand_image, validate_factor, ExpansionConfig, Fill, FactorCheck};
use symlab::io::{read_tensor, write_tensor};
use symlab::numerics::stream;
use symlab::Prng;

use crate::run::{create, usage, RunContext};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandConfig {
    /// A single `H × W × C` image or an `N × H × W × C` batch.
    pub input: Option<PathBuf>,
    pub factors: Vec<usize>,
    pub fills: Vec<Fill>,
    pub first_kernel_size: Option<usize>,
    pub seed: u64,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self {
            input: None,
            factors: vec![2],
            fills: vec![Fill::default()],
            first_kernel_size: None,
            seed: 0,
        }
    }
}

fn parse_fill(s: &str) -> Result<Fill> {
    if s == "random" {
        return Ok(Fill::random());
    }
    s.parse::<f64>()
        .map(Fill::constant)
        .map_err(|_| usage(format!("--fill expects a number or `random`, got `{s}`")))
}

fn fill_label(fill: &Fill) -> String {
    match fill {
        Fill::Constant { value } => format!("fill{value}"),
        Fill::RandomNormal { .. } => "random".into(),
    }
}

#[derive(Serialize)]
struct SweepRow {
    factor: usize,
    fill: String,
    output: String,
    shape: String,
    warning: String,
}

/// One output tensor per (factor, fill) pair and a `sweep.csv` index.
pub fn run(
    ctx: &RunContext,
    input: Option<PathBuf>,
    factors: Vec<usize>,
    fills: Vec<String>,
    first_kernel: Option<usize>,
) -> Result<()> {
    let mut cfg: ExpandConfig = ctx.load_config()?;
    if input.is_some() {
        cfg.input = input;
    }
    if !factors.is_empty() {
        cfg.factors = factors;
    }
    if !fills.is_empty() {
        cfg.fills = fills.iter().map(|s| parse_fill(s)).collect::<Result<_>>()?;
    }
    cfg.first_kernel_size = first_kernel.or(cfg.first_kernel_size);
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    let path = cfg.input.clone().ok_or_else(|| usage("expand needs --input"))?;
    if cfg.factors.is_empty() || cfg.fills.is_empty() {
        return Err(usage("expand needs at least one factor and one fill"));
    }
    let plan = cfg
        .factors
        .iter()
        .flat_map(|&k| cfg.fills.iter().map(move |f| (k, f.clone())))
        .map(|(k, fill)| {
            let mut ec = ExpansionConfig::new(k, fill);
            ec.first_kernel_size = cfg.first_kernel_size;
            ec.validate()?;
            Ok(ec)
        })
        .collect::<Result<Vec<_>>>()?;
    let tensor = read_tensor(&path)?;
    ctx.output_dir()?;

    let mut rows = Vec::new();
    for (i, ec) in plan.iter().enumerate() {
        let mut prng = Prng::derive(cfg.seed, &[stream::FILL, i as u64]);
        let out = match tensor.rank() {
            3 => expand_image(&tensor, ec, &mut prng)?,
            4 => expand_batch(&tensor, ec, &mut prng)?,
            r => {
                return Err(symlab::Error::Format {
                    offset: 0,
                    message: format!("expected a rank-3 image or rank-4 batch, got rank {r}"),
                }
                .into())
            }
        };
        let name = format!("expanded_k{}_{}.f64", ec.factor, fill_label(&ec.fill));
        write_tensor(&ctx.path(&name), &out)?;
        let warning = match validate_factor(ec) {
            FactorCheck::Ok => String::new(),
            FactorCheck::Warning(msg) => {
                eprintln!("warning: {msg}");
                msg
            }
        };
        rows.push(SweepRow {
            factor: ec.factor,
            fill: fill_label(&ec.fill),
            output: name,
            shape: format!("{:?}", out.shape()),
            warning,
        });
    }
    let mut w = csv::Writer::from_writer(create(&ctx.path("sweep.csv"))?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    ctx.snapshot("expand", &cfg)
}
