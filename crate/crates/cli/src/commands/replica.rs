use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use symlab::replica::{compare_architectures, ArchitectureId, DatasetSpec, ReplicaRunSpec};

use crate::run::{create, usage, write_json, RunContext};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// 20 replicas × 50 epochs on 100 bars images.
    Desk,
    /// 200 replicas × 200 epochs.
    Full,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaConfig {
    pub specs: Vec<ReplicaRunSpec>,
}

impl Default for ReplicaConfig {
    fn default() -> Self {
        preset(Preset::Desk)
    }
}

pub fn preset(p: Preset) -> ReplicaConfig {
    ReplicaConfig {
        specs: ArchitectureId::ALL
            .iter()
            .map(|&a| match p {
                Preset::Desk => ReplicaRunSpec::desk(a),
                Preset::Full => ReplicaRunSpec::full(a),
            })
            .collect(),
    }
}

/// `--seed s` makes the replica seeds `s+1 ..= s+R` and seeds the bars data
/// with `s`.
fn apply_seed(spec: &mut ReplicaRunSpec, seed: u64) {
    let r = spec.seeds.len() as u64;
    spec.seeds = (1..=r).map(|k| seed + k).collect();
    if let DatasetSpec::Bars { seed: s, .. } = &mut spec.dataset {
        *s = seed;
    }
}

#[derive(Serialize)]
struct TableRow<'a> {
    rank: usize,
    arch: &'a str,
    metric_mean: f64,
    metric_peak: f64,
    mean_test_accuracy: f64,
    replicas: usize,
    failures: usize,
}

/// `reports/{arch}.json` per architecture and `comparison.csv`, ranked by
/// mean replica distance.
pub fn run(ctx: &RunContext, preset_flag: Option<Preset>, cache: Option<PathBuf>) -> Result<()> {
    let mut cfg: ReplicaConfig = match preset_flag {
        Some(p) if ctx.config.is_none() => preset(p),
        Some(_) => return Err(usage("--preset and --config are mutually exclusive")),
        None => ctx.load_config()?,
    };
    if let Some(seed) = ctx.seed {
        cfg.specs.iter_mut().for_each(|s| apply_seed(s, seed));
    }
    let out = ctx.output_dir()?;
    let cache = cache.unwrap_or_else(|| out.join("cache"));
    let reports = compare_architectures(&cfg.specs, Some(&cache))?;
    let dir = out.join("reports");
    std::fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_writer(create(&out.join("comparison.csv"))?);
    for (rank, rep) in reports.iter().enumerate() {
        write_json(&dir.join(format!("{}.json", rep.arch)), rep)?;
        for f in &rep.failures {
            eprintln!("warning: {} seed {} failed: {}", rep.arch, f.seed, f.error);
        }
        w.serialize(TableRow {
            rank,
            arch: rep.arch.name(),
            metric_mean: rep.metric_mean,
            metric_peak: rep.metric_peak,
            mean_test_accuracy: rep.mean_test_accuracy,
            replicas: rep.seeds.len(),
            failures: rep.failures.len(),
        })?;
        eprintln!(
            "{:<26} mean {:.5}  peak {:.5}  test acc {:.3}",
            rep.arch, rep.metric_mean, rep.metric_peak, rep.mean_test_accuracy
        );
    }
    w.flush()?;
    ctx.snapshot("replica", &cfg)
}
