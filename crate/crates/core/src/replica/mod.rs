//! Replica-distance measure of symmetry breaking.
//!
//! One architecture is trained from many seeds. The flattened final weights
//! are reduced with PCA, each reduced row is read as a 1-D sample, and the
//! pairwise Wasserstein distances between rows are summarized by their mean
//! and by the peak of their smoothed density.


use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{
    accuracy, train, LayerSpec, LossKind, Network, NetworkSpec, OptimizerConfig, ParamState,
    TrainConfig,
};
use crate::datasets::{gen_bars_dataset, load_cifar10, LabeledImageSet};
use crate::group::Transform;
use crate::io::{read_tensor, write_tensor};
use crate::numerics::{
    density_summary, smoothed_histogram, stream, wasserstein_1d, DensityCurve, PcaReducer, Prng,
    Reducer, Tensor,
};
use crate::{Error, Result};

pub const DEFAULT_DROPOUT: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureId {
    SimpleCnn,
    DropoutCnn,
    BatchnormCnn,
    FlipEquivarianceCnn,
    RotationEquivarianceCnn,
}

impl ArchitectureId {
    pub const ALL: [ArchitectureId; 5] = [
        ArchitectureId::SimpleCnn,
        ArchitectureId::DropoutCnn,
        ArchitectureId::BatchnormCnn,
        ArchitectureId::FlipEquivarianceCnn,
        ArchitectureId::RotationEquivarianceCnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureId::SimpleCnn => "simple_cnn",
            ArchitectureId::DropoutCnn => "dropout_cnn",
            ArchitectureId::BatchnormCnn => "batchnorm_cnn",
            ArchitectureId::FlipEquivarianceCnn => "flip_equivariance_cnn",
            ArchitectureId::RotationEquivarianceCnn => "rotation_equivariance_cnn",
        }
    }

    /// conv8 → relu → pool → conv16 → relu → pool → dense32 → relu → dense.
    /// Batchnorm follows each convolution; dropout sits before the output
    /// layer; the equivariance variants transform half of each training
    /// batch (horizontal flip, or 180° rotation).
    pub fn network_spec(self, input_shape: &[usize], classes: usize) -> NetworkSpec {
        let bn = self == ArchitectureId::BatchnormCnn;
        let mut layers = Vec::new();
        match self {
            ArchitectureId::FlipEquivarianceCnn => layers.push(LayerSpec::Augment {
                transform: Transform::HFlip,
            }),
            ArchitectureId::RotationEquivarianceCnn => layers.push(LayerSpec::Augment {
                transform: Transform::Rot180,
            }),
            _ => {}
        }
        for filters in [8, 16] {
            layers.push(LayerSpec::Conv2d { filters, kernel: 3 });
            if bn {
                layers.push(LayerSpec::BatchNorm2d);
            }
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool2);
        }
        layers.extend([LayerSpec::Flatten, LayerSpec::Dense { units: 32 }, LayerSpec::Relu]);
        if self == ArchitectureId::DropoutCnn {
            layers.push(LayerSpec::Dropout {
                rate: DEFAULT_DROPOUT,
            });
        }
        layers.push(LayerSpec::Dense { units: classes });
        NetworkSpec::new(input_shape.to_vec(), layers, LossKind::SoftmaxCrossEntropy)
    }
}

impl std::fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Fresh bars images; the test set comes from an independent stream.
    Bars { n: usize, test_n: usize, seed: u64 },
    /// `count` training and `test_count` held-out images drawn without
    /// replacement from a CIFAR-10 binary batch.
    Cifar10Subset {
        path: PathBuf,
        count: usize,
        test_count: usize,
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn bars(n: usize) -> Self {
        DatasetSpec::Bars {
            n,
            test_n: 200,
            seed: 0,
        }
    }

    /// `(train, test)`.
    pub fn load(&self) -> Result<(LabeledImageSet, LabeledImageSet)> {
        match self {
            &DatasetSpec::Bars { n, test_n, seed } => Ok((
                gen_bars_dataset(n, &mut Prng::derive(seed, &[stream::DATA]))?,
                gen_bars_dataset(test_n, &mut Prng::derive(seed, &[stream::TEST_DATA]))?,
            )),
            DatasetSpec::Cifar10Subset {
                path,
                count,
                test_count,
                seed,
            } => {
                let all = load_cifar10(path)?;
                if count + test_count > all.len() {
                    return Err(Error::invalid(format!(
                        "asked for {count} + {test_count} images from a file of {}",
                        all.len()
                    )));
                }
                let order = Prng::derive(*seed, &[stream::SUBSET]).permutation(all.len());
                let pick = |idx: &[usize], name: &str| {
                    LabeledImageSet::new(
                        format!("{}[{name}]", all.name),
                        idx.iter().map(|&i| all.images[i].clone()).collect(),
                        idx.iter().map(|&i| all.labels[i]).collect(),
                        all.num_classes,
                    )
                };
                Ok((
                    pick(&order[..*count], "train")?,
                    pick(&order[*count..count + test_count], "test")?,
                ))
            }
        }
    }
}

/// Optimizer budget shared by every replica; each replica supplies its
/// own seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaTraining {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
}

impl ReplicaTraining {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaRunSpec {
    pub arch: ArchitectureId,
    pub dataset: DatasetSpec,
    pub seeds: Vec<u64>,
    pub train: ReplicaTraining,
    #[serde(default = "default_reduce_dim")]
    pub reduce_dim: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_sigma_bins")]
    pub sigma_bins: f64,
}

fn default_reduce_dim() -> usize {
    100
}
fn default_bins() -> usize {
    50
}
fn default_sigma_bins() -> f64 {
    2.0
}

impl ReplicaRunSpec {
    /// 20 replicas, 50 epochs, 100 bars images.
    pub fn desk(arch: ArchitectureId) -> Self {
        Self {
            arch,
            dataset: DatasetSpec::bars(100),
            seeds: (1..=20).collect(),
            train: ReplicaTraining {
                optimizer: OptimizerConfig::adam(0.01),
                epochs: 50,
                batch_size: 20,
            },
            reduce_dim: default_reduce_dim(),
            bins: default_bins(),
            sigma_bins: default_sigma_bins(),
        }
    }

    /// 200 replicas, 200 epochs.
    pub fn full(arch: ArchitectureId) -> Self {
        let mut spec = Self::desk(arch);
        spec.seeds = (1..=200).collect();
        spec.train.epochs = 200;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 replicas, got {}",
                self.seeds.len()
            )));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("seed {} repeats", w[0])));
        }
        if self.reduce_dim == 0 {
            return Err(Error::invalid("reduce_dim must be >= 1"));
        }
        self.train.with_seed(0).validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub seed: u64,
    pub error: String,
}

/// Trained replicas of one architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaSet {
    pub arch: ArchitectureId,
    /// Seeds of the rows of `weights`, in spec order.
    pub seeds: Vec<u64>,
    /// `R × D` flattened final parameters.
    pub weights: Tensor,
    pub test_accuracy: Vec<f64>,
    pub failures: Vec<ReplicaFailure>,
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    spec_hash: String,
    seeds: Vec<u64>,
    test_accuracy: Vec<f64>,
    failures: Vec<ReplicaFailure>,
}

impl ReplicaSet {
    /// Writes `weights.f64` (+ its JSON sidecar) and `replicas.json`.
    pub fn save(&self, dir: &Path, spec_hash: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_tensor(&dir.join("weights.f64"), &self.weights)?;
        let meta = CacheMeta {
            spec_hash: spec_hash.to_owned(),
            seeds: self.seeds.clone(),
            test_accuracy: self.test_accuracy.clone(),
            failures: self.failures.clone(),
        };
        std::fs::write(dir.join("replicas.json"), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Loads a saved set if its spec hash matches.
    pub fn load(dir: &Path, spec: &ReplicaRunSpec) -> Result<Option<Self>> {
        let meta_path = dir.join("replicas.json");
        if !meta_path.exists() {
            return Ok(None);
        }
        let meta: CacheMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
        if meta.spec_hash != spec.hash() {
            return Ok(None);
        }
        Ok(Some(Self {
            arch: spec.arch,
            seeds: meta.seeds,
            weights: read_tensor(&dir.join("weights.f64"))?,
            test_accuracy: meta.test_accuracy,
            failures: meta.failures,
        }))
    }
}

/// One replica: final parameters and held-out accuracy.
pub fn train_replica(
    spec: &ReplicaRunSpec,
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
    seed: u64,
) -> Result<(ParamState, f64)> {
    let shape = train_set
        .image_shape()
        .ok_or_else(|| Error::invalid("empty training set"))?;
    let net = Network::new(spec.arch.network_spec(shape, train_set.num_classes))?;
    let outcome = train(
        &net,
        &train_set.batch()?,
        &train_set.targets(),
        &spec.train.with_seed(seed),
    )?;
    let logits = net.predict(&outcome.params, &test_set.batch()?)?;
    Ok((outcome.params, accuracy(&logits, &test_set.labels)))
}

/// Trains every seed in parallel. Diverging replicas are reported in
/// `failures`; the run fails only when fewer than two replicas survive.
pub fn train_replicas(spec: &ReplicaRunSpec) -> Result<ReplicaSet> {
    spec.validate()?;
    let (train_set, test_set) = spec.dataset.load()?;
    let results: Vec<_> = spec
        .seeds
        .par_iter()
        .map(|&seed| (seed, train_replica(spec, &train_set, &test_set, seed)))
        .collect();
    let mut seeds = Vec::new();
    let mut rows = Vec::new();
    let mut test_accuracy = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok((params, acc)) => {
                seeds.push(seed);
                rows.push(Tensor::from_vec(params.values)?);
                test_accuracy.push(acc);
            }
            Err(e @ Error::TrainingDiverged { .. }) => failures.push(ReplicaFailure {
                seed,
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 2 {
        let names: Vec<String> = failures.iter().map(|f| f.seed.to_string()).collect();
        return Err(Error::invalid(format!(
            "fewer than 2 replicas survived; diverged seeds: {}",
            names.join(", ")
        )));
    }
    Ok(ReplicaSet {
        arch: spec.arch,
        seeds,
        weights: Tensor::stack(&rows)?,
        test_accuracy,
        failures,
    })
}

/// Distances between every unordered pair of replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaDistances {
    /// Row-index pairs `(r, s)`, `r < s`, in the input's row numbering.
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
    pub curve: DensityCurve,
    pub metric_mean: f64,
    pub metric_peak: f64,
}

/// Rows sorted lexicographically, so every later stage sees the same
/// matrix whatever order the replicas arrived in.
fn canonical_order(weights: &Tensor) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.batch_len()).collect();
    order.sort_by(|&a, &b| {
        weights
            .item(a)
            .iter()
            .zip(weights.item(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// PCA to `d` dimensions, pairwise 1-D Wasserstein distances between the
/// reduced rows, and their smoothed density.
pub fn symmetry_metric(weights: &Tensor, d: usize, bins: usize, sigma_bins: f64) -> Result<ReplicaDistances> {
    symmetry_metric_with(&PcaReducer, weights, d, bins, sigma_bins)
}

pub fn symmetry_metric_with(
    reducer: &dyn Reducer,
    weights: &Tensor,
    d: usize,
    bins: usize,
    sigma_bins: f64,
) -> Result<ReplicaDistances> {
    if weights.rank() != 2 || weights.batch_len() < 2 {
        return Err(Error::invalid(format!(
            "need an R × D weight matrix with R >= 2, got shape {:?}",
            weights.shape()
        )));
    }
    let order = canonical_order(weights);
    let reduced = reducer.reduce(&weights.gather(&order)?, d)?;
    let r = order.len();
    let index: Vec<(usize, usize)> = (0..r)
        .flat_map(|a| (a + 1..r).map(move |b| (a, b)))
        .collect();
    let distances = index
        .par_iter()
        .map(|&(a, b)| wasserstein_1d(reduced.item(a), reduced.item(b)))
        .collect::<Result<Vec<f64>>>()?;
    let pairs = index
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (order[a], order[b]);
            (x.min(y), x.max(y))
        })
        .collect();
    let curve = smoothed_histogram(&distances, bins, sigma_bins)?;
    let summary = density_summary(&curve, &distances);
    Ok(ReplicaDistances {
        pairs,
        distances,
        curve,
        metric_mean: summary.mean,
        metric_peak: summary.peak,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub arch: ArchitectureId,
    pub spec_hash: String,
    pub seeds: Vec<u64>,
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
    pub curve: DensityCurve,
    /// Mean pairwise distance; larger means more symmetry breaking.
    pub metric_mean: f64,
    /// Most likely pairwise distance.
    pub metric_peak: f64,
    pub test_accuracy: Vec<f64>,
    pub mean_test_accuracy: f64,
    pub failures: Vec<ReplicaFailure>,
}

pub fn report(spec: &ReplicaRunSpec, set: &ReplicaSet) -> Result<SymmetryReport> {
    let m = symmetry_metric(&set.weights, spec.reduce_dim, spec.bins, spec.sigma_bins)?;
    Ok(SymmetryReport {
        arch: set.arch,
        spec_hash: spec.hash(),
        seeds: set.seeds.clone(),
        pairs: m.pairs,
        distances: m.distances,
        curve: m.curve,
        metric_mean: m.metric_mean,
        metric_peak: m.metric_peak,
        mean_test_accuracy: set.test_accuracy.iter().sum::<f64>() / set.test_accuracy.len() as f64,
        test_accuracy: set.test_accuracy.clone(),
        failures: set.failures.clone(),
    })
}

/// Trains, measures and ranks several architectures on one dataset and
/// budget, highest `metric_mean` first. `cache` holds one directory per
/// spec hash; matching entries are reused instead of retrained.
pub fn compare_architectures(
    specs: &[ReplicaRunSpec],
    cache: Option<&Path>,
) -> Result<Vec<SymmetryReport>> {
    if specs.len() < 2 {
        return Err(Error::invalid("comparison needs at least 2 specs"));
    }
    let first = &specs[0];
    if let Some(bad) = specs
        .iter()
        .find(|s| s.dataset != first.dataset || s.train != first.train)
    {
        return Err(Error::invalid(format!(
            "{} does not share the dataset and training budget of {}",
            bad.arch, first.arch
        )));
    }
    let mut reports = specs
        .iter()
        .map(|spec| {
            let set = match cache {
                Some(dir) => {
                    let dir = dir.join(spec.hash());
                    match ReplicaSet::load(&dir, spec)? {
                        Some(set) => set,
                        None => {
                            let set = train_replicas(spec)?;
                            set.save(&dir, &spec.hash())?;
                            set
                        }
                    }
                }
                None => train_replicas(spec)?,
            };
            report(spec, &set)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| b.metric_mean.total_cmp(&a.metric_mean));
    Ok(reports)
}
