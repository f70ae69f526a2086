//! Labeled window collections, their on-disk form, and train/test partitions.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectro::{ActivitySample, Domain, Spectrogram};
use crate::tensor_io::{Tensor, TensorError};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("samples have inconsistent window shapes")]
    InconsistentShape,
    #[error("label {label} outside class set of {n_classes}")]
    BadLabel { label: usize, n_classes: usize },
    #[error("partition leaves an empty side: {0}")]
    PartitionEmpty(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("sidecar does not match tensor: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<S> {
    pub classes: Vec<String>,
    pub samples: Vec<ActivitySample<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleMeta {
    label: usize,
    env_id: u32,
    person_id: u32,
    session_id: u32,
    start_packet: usize,
    t0_us: u64,
}

/// JSON sidecar written next to the sample tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    classes: Vec<String>,
    n_packets: usize,
    n_ant: usize,
    n_cols: usize,
    dt_us: f64,
    samples: Vec<SampleMeta>,
}

/// `foo.tns` -> `foo.json`.
pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("json")
}

impl<S: Scalar> LabeledDataset<S> {
    pub fn new(classes: Vec<String>, samples: Vec<ActivitySample<S>>) -> Result<Self> {
        let ds = Self { classes, samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// (packets, antennas, columns) of every window.
    pub fn window_shape(&self) -> Option<(usize, usize, usize)> {
        self.samples.first().map(|s| (s.window.n_packets, s.window.n_ant, s.window.n_cols))
    }

    fn validate(&self) -> Result<()> {
        let shape = self.window_shape();
        for s in &self.samples {
            if Some((s.window.n_packets, s.window.n_ant, s.window.n_cols)) != shape {
                return Err(DatasetError::InconsistentShape);
            }
            if s.label >= self.classes.len() {
                return Err(DatasetError::BadLabel { label: s.label, n_classes: self.classes.len() });
            }
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { classes: self.classes.clone(), samples: indices.iter().map(|&i| self.samples[i].clone()).collect() }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn concat(mut self, other: Self) -> Result<Self> {
        if self.classes != other.classes {
            return Err(DatasetError::Sidecar("class sets differ".into()));
        }
        self.samples.extend(other.samples);
        self.validate()?;
        Ok(self)
    }

    /// Writes `[n, rows, cols]` to `path` plus the JSON sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (n_packets, n_ant, n_cols) = self.window_shape().ok_or(DatasetError::Empty)?;
        let rows = n_packets * n_ant;
        let mut flat = Vec::with_capacity(self.len() * rows * n_cols);
        for s in &self.samples {
            flat.extend_from_slice(&s.window.data);
        }
        Tensor::new(vec![self.len() as u64, rows as u64, n_cols as u64], &flat)?.write(path)?;
        let side = Sidecar {
            classes: self.classes.clone(),
            n_packets,
            n_ant,
            n_cols,
            dt_us: self.samples[0].window.dt_us,
            samples: self
                .samples
                .iter()
                .map(|s| SampleMeta {
                    label: s.label,
                    env_id: s.domain.env_id,
                    person_id: s.domain.person_id,
                    session_id: s.domain.session_id,
                    start_packet: s.start_packet,
                    t0_us: s.window.t0_us,
                })
                .collect(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let t = Tensor::read(path)?;
        let side: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        let rows = side.n_packets * side.n_ant;
        if t.dims != [side.samples.len() as u64, rows as u64, side.n_cols as u64] {
            return Err(DatasetError::Sidecar(format!("tensor dims {:?}", t.dims)));
        }
        let values: Vec<S> = t.to_scalars();
        let per = rows * side.n_cols;
        let samples = side
            .samples
            .iter()
            .enumerate()
            .map(|(i, m)| ActivitySample {
                window: Spectrogram {
                    data: values[i * per..(i + 1) * per].to_vec(),
                    n_packets: side.n_packets,
                    n_ant: side.n_ant,
                    n_cols: side.n_cols,
                    t0_us: m.t0_us,
                    dt_us: side.dt_us,
                },
                label: m.label,
                domain: Domain { env_id: m.env_id, person_id: m.person_id, session_id: m.session_id },
                start_packet: m.start_packet,
            })
            .collect();
        Self::new(side.classes, samples)
    }
}

/// How a dataset is split into a seen (train) side and a shifted (test) side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionSpec {
    ByEnvironment { held_out: Vec<u32> },
    /// Persons held out within one environment; `env_id = None` uses all environments.
    ByPerson { env_id: Option<u32>, held_out: Vec<u32> },
    /// Per session, the earliest `train_fraction` of windows train and the rest test.
    ByTime { train_fraction: f64 },
}

impl PartitionSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PartitionSpec::ByEnvironment { .. } => "by_environment",
            PartitionSpec::ByPerson { .. } => "by_person",
            PartitionSpec::ByTime { .. } => "by_time",
        }
    }
}

/// Sample indices on each side of a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_held_out(held: &[u32], present: &BTreeSet<u32>, what: &str) -> Result<()> {
    if held.is_empty() {
        return Err(DatasetError::InvalidPartition(format!("no held-out {what}")));
    }
    if let Some(h) = held.iter().find(|h| !present.contains(h)) {
        return Err(DatasetError::InvalidPartition(format!("held-out {what} {h} not in dataset")));
    }
    let held: BTreeSet<u32> = held.iter().copied().collect();
    if present.is_subset(&held) {
        return Err(DatasetError::InvalidPartition(format!("every {what} is held out")));
    }
    Ok(())
}

pub fn split_by<S: Scalar>(ds: &LabeledDataset<S>, spec: &PartitionSpec) -> Result<Split> {
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    match spec {
        PartitionSpec::ByEnvironment { held_out } => {
            let present: BTreeSet<u32> = ds.samples.iter().map(|s| s.domain.env_id).collect();
            check_held_out(held_out, &present, "environment")?;
            for (i, s) in ds.samples.iter().enumerate() {
                if held_out.contains(&s.domain.env_id) {
                    split.test.push(i);
                } else {
                    split.train.push(i);
                }
            }
        }
        PartitionSpec::ByPerson { env_id, held_out } => {
            let in_env = |s: &ActivitySample<S>| env_id.map_or(true, |e| s.domain.env_id == e);
            let present: BTreeSet<u32> = ds.samples.iter().filter(|s| in_env(s)).map(|s| s.domain.person_id).collect();
            check_held_out(held_out, &present, "person")?;
            for (i, s) in ds.samples.iter().enumerate().filter(|(_, s)| in_env(s)) {
                if held_out.contains(&s.domain.person_id) {
                    split.test.push(i);
                } else {
                    split.train.push(i);
                }
            }
        }
        PartitionSpec::ByTime { train_fraction } => {
            if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                return Err(DatasetError::InvalidPartition(format!("train_fraction {train_fraction} not in (0, 1)")));
            }
            let sessions: BTreeSet<Domain> = ds.samples.iter().map(|s| s.domain).collect();
            for d in sessions {
                let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples[i].domain == d).collect();
                idx.sort_by_key(|&i| (ds.samples[i].start_packet, i));
                let cut = (idx.len() as f64 * train_fraction).floor() as usize;
                split.train.extend_from_slice(&idx[..cut]);
                split.test.extend_from_slice(&idx[cut..]);
            }
            split.train.sort_unstable();
            split.test.sort_unstable();
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(DatasetError::PartitionEmpty(spec.kind_name().into()));
    }
    Ok(split)
}

/// Per-class seeded split of `indices` into (train, held-out); each class with
/// at least two samples keeps at least one on each side.
pub fn stratified_split(indices: &[usize], labels: &[usize], held_out_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: BTreeSet<usize> = indices.iter().map(|&i| labels[i]).collect();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for c in classes {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let mut n_held = (members.len() as f64 * held_out_fraction).round() as usize;
        if held_out_fraction > 0.0 && members.len() >= 2 {
            n_held = n_held.clamp(1, members.len() - 1);
        }
        held.extend_from_slice(&members[..n_held]);
        train.extend_from_slice(&members[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}
