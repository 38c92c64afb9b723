use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// A bad config, flag or missing input file.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<symlab::Error>() {
            return match e {
                symlab::Error::InvalidArgument(_) | symlab::Error::LayerShape { .. } => EXIT_USAGE,
                symlab::Error::Format { .. } | symlab::Error::Json(_) => EXIT_FORMAT,
                symlab::Error::NumericalDomain { .. } | symlab::Error::TrainingDiverged { .. } => {
                    EXIT_NUMERICAL
                }
                symlab::Error::Io(io) if io.kind() == ErrorKind::NotFound => EXIT_USAGE,
                symlab::Error::Io(_) => 1,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            return if io.kind() == ErrorKind::NotFound { EXIT_USAGE } else { 1 };
        }
    }
    1
}

pub struct RunContext {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

impl RunContext {
    pub fn init_workers(&self) -> Result<()> {
        if let Some(n) = self.workers {
            if n == 0 {
                return Err(usage("--workers must be >= 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("starting the worker pool")?;
        }
        Ok(())
    }

    /// The config file if given, else `T::default()`. Unknown keys are
    /// rejected by each config type.
    pub fn load_config<T: DeserializeOwned + Default>(&self) -> Result<T> {
        let Some(path) = &self.config else {
            return Ok(T::default());
        };
        let bytes = fs::read(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn output_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// `resolved_config.json` with the command, flags and final config.
    pub fn snapshot<T: Serialize>(&self, command: &str, config: &T) -> Result<()> {
        let snap = serde_json::json!({
            "command": command,
            "seed": self.seed,
            "workers": self.workers,
            "config": config,
        });
        write_json(&self.path("resolved_config.json"), &snap)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}
