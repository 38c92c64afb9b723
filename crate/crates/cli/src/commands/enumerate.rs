use anyhow::Result;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use symlab::landscape::{
    compare_landscapes, degeneracy_profile, enumerate, BiasMode, ConvVariant, EnumerateOptions,
    LandscapeLoss, LossLandscape, ScalarVariant, TinyData, TinyNetSpec, DEFAULT_GRID, DEFAULT_TOL,
};

use crate::run::{create, usage, write_json, RunContext};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// Scalar net raw vs expanded, with a comparison.
    ScalarPair,
    /// Scalar net with and without the enumerated first-layer bias.
    ScalarBias,
    /// The five 2×2 ConvNet variants.
    ConvnetSweep,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    ScalarGrid { m: usize },
    TwoByTwo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateRun {
    pub name: String,
    pub spec: TinyNetSpec,
    pub data: DataSource,
    /// Defaults to mse for the scalar net and cross-entropy for ConvNets.
    #[serde(default)]
    pub loss: Option<LandscapeLoss>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerateConfig {
    pub runs: Vec<EnumerateRun>,
    /// Pairs of run names to compare.
    pub compare: Vec<(String, String)>,
    /// Seeds the dropout masks.
    pub seed: u64,
}

impl Default for EnumerateConfig {
    fn default() -> Self {
        preset(Preset::ConvnetSweep)
    }
}

fn scalar_run(name: &str, variant: ScalarVariant, bias: BiasMode) -> EnumerateRun {
    EnumerateRun {
        name: name.into(),
        spec: TinyNetSpec::scalar(variant, bias),
        data: DataSource::ScalarGrid { m: DEFAULT_GRID },
        loss: None,
        tol: DEFAULT_TOL,
    }
}

fn variant_name(v: ConvVariant) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn preset(p: Preset) -> EnumerateConfig {
    let (runs, compare) = match p {
        Preset::ScalarPair => (
            vec![
                scalar_run("scalar_raw", ScalarVariant::Raw, BiasMode::None),
                scalar_run("scalar_expanded", ScalarVariant::Expanded, BiasMode::None),
            ],
            vec![("scalar_raw".into(), "scalar_expanded".into())],
        ),
        Preset::ScalarBias => (
            vec![
                scalar_run("scalar_raw", ScalarVariant::Raw, BiasMode::None),
                scalar_run("scalar_raw_bias", ScalarVariant::Raw, BiasMode::EnumeratedFirstLayer),
            ],
            vec![("scalar_raw".into(), "scalar_raw_bias".into())],
        ),
        Preset::ConvnetSweep => (
            ConvVariant::ALL
                .iter()
                .map(|&v| EnumerateRun {
                    name: format!("convnet_{}", variant_name(v)),
                    spec: TinyNetSpec::convnet(v),
                    data: DataSource::TwoByTwo,
                    loss: None,
                    tol: DEFAULT_TOL,
                })
                .collect(),
            vec![("convnet_equivariant".into(), "convnet_wrong_equivariant".into())],
        ),
    };
    EnumerateConfig {
        runs,
        compare,
        seed: 0,
    }
}

/// `{name}.csv` and `{name}.profile.json` per run, `compare_{a}_vs_{b}.json`
/// per comparison.
pub fn run(ctx: &RunContext, preset_flag: Option<Preset>) -> Result<()> {
    let mut cfg: EnumerateConfig = match preset_flag {
        Some(p) if ctx.config.is_none() => preset(p),
        Some(_) => return Err(usage("--preset and --config are mutually exclusive")),
        None => ctx.load_config()?,
    };
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    for (a, b) in &cfg.compare {
        for name in [a, b] {
            if !cfg.runs.iter().any(|r| &r.name == name) {
                return Err(usage(format!("comparison names unknown run `{name}`")));
            }
        }
    }
    ctx.output_dir()?;
    let mut done: Vec<(String, LossLandscape)> = Vec::new();
    for r in &cfg.runs {
        let data = match r.data {
            DataSource::ScalarGrid { m } => TinyData::scalar_grid(m)?,
            DataSource::TwoByTwo => TinyData::two_by_two(),
        };
        let loss = r.loss.unwrap_or(match r.spec {
            TinyNetSpec::ScalarNet { .. } => LandscapeLoss::Mse,
            TinyNetSpec::Convnet2x2 { .. } => LandscapeLoss::CrossEntropy,
        });
        let opts = EnumerateOptions {
            loss,
            tol: r.tol,
            seed: cfg.seed,
            workers: 0,
        };
        let land = enumerate(&r.spec, &data, &opts)?;
        land.write_csv(create(&ctx.path(&format!("{}.csv", r.name)))?)?;
        write_json(&ctx.path(&format!("{}.profile.json", r.name)), &land.profile_json())?;
        let p = degeneracy_profile(&land);
        eprintln!(
            "{}: {} configs, {} levels, plateau {:.4}, min loss {:.6}",
            r.name,
            p.config_count,
            p.distinct_levels,
            p.plateau_fraction,
            land.min_loss()
        );
        done.push((r.name.clone(), land));
    }
    let find = |n: &str| &done.iter().find(|(name, _)| name == n).expect("checked above").1;
    for (a, b) in &cfg.compare {
        let cmp = compare_landscapes(find(a), find(b))?;
        write_json(&ctx.path(&format!("compare_{a}_vs_{b}.json")), &cmp)?;
    }
    ctx.snapshot("enumerate", &cfg)
}
