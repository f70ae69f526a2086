use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::{ModelError, Result};
use crate::tensor_io::Tensor;
use crate::Scalar;

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvOffsets {
    pub w: usize,
    pub b: usize,
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmOffsets {
    pub w_ih: usize,
    pub w_hh: usize,
    pub bias: usize,
    pub input: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub conv: [ConvOffsets; 3],
    /// `[layer][direction]`, direction 0 = forward, 1 = backward.
    pub lstm: Vec<[LstmOffsets; 2]>,
    pub head_w: usize,
    pub head_b: usize,
    pub dom: Option<(usize, usize)>,
    pub segments: Vec<Segment>,
    pub total: usize,
    /// Offsets of (running_mean, running_var) per block in the buffer vector.
    pub bn_buf: [(usize, usize); 3],
    pub buffers: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut segments = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let len = shape.iter().product();
            segments.push(Segment { name, shape, offset: total, len });
            total += len;
            total - len
        };
        let blocks = cfg.blocks()?;
        let mut conv = [ConvOffsets { w: 0, b: 0, gamma: 0, beta: 0 }; 3];
        for (l, b) in blocks.iter().enumerate() {
            conv[l] = ConvOffsets {
                w: push(format!("conv{l}.weight"), vec![b.c_out, b.c_in, b.kt, b.kf]),
                b: push(format!("conv{l}.bias"), vec![b.c_out]),
                gamma: push(format!("bn{l}.gamma"), vec![b.c_out]),
                beta: push(format!("bn{l}.beta"), vec![b.c_out]),
            };
        }
        let h = cfg.lstm_hidden;
        let mut input = cfg.sequence_shape()?.1;
        let mut lstm = Vec::new();
        for l in 0..cfg.lstm_layers {
            let mut dirs = [LstmOffsets { w_ih: 0, w_hh: 0, bias: 0, input }; 2];
            for (d, tag) in ["fwd", "bwd"].iter().enumerate() {
                dirs[d] = LstmOffsets {
                    w_ih: push(format!("lstm{l}.{tag}.w_ih"), vec![4 * h, input]),
                    w_hh: push(format!("lstm{l}.{tag}.w_hh"), vec![4 * h, h]),
                    bias: push(format!("lstm{l}.{tag}.bias"), vec![4 * h]),
                    input,
                };
            }
            lstm.push(dirs);
            input = 2 * h;
        }
        let head_w = push("head.weight".into(), vec![cfg.n_classes, 2 * h]);
        let head_b = push("head.bias".into(), vec![cfg.n_classes]);
        let dom = cfg.domain_branch.map(|d| {
            (push("domain.weight".into(), vec![d.n_domains, 2 * h]), push("domain.bias".into(), vec![d.n_domains]))
        });
        let mut bn_buf = [(0, 0); 3];
        let mut buffers = 0;
        for (l, b) in blocks.iter().enumerate() {
            bn_buf[l] = (buffers, buffers + b.c_out);
            buffers += 2 * b.c_out;
        }
        Ok(Self { conv, lstm, head_w, head_b, dom, segments, total, bn_buf, buffers })
    }
}

/// All trainable tensors in one flat vector plus batch-norm running statistics.
#[derive(Debug, Clone)]
pub struct Parameters<S> {
    pub config: ModelConfig,
    pub values: Vec<S>,
    /// Running means and variances, not trained by gradient descent.
    pub buffers: Vec<S>,
    pub(crate) layout: Layout,
}

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, dst: &mut [S], bound: f64) {
    for v in dst {
        *v = S::of(rng.gen_range(-bound..bound));
    }
}

impl<S: Scalar> Parameters<S> {
    /// Fan-in scaled uniform init; LSTM forget-gate biases start at 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let layout = Layout::new(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![S::zero(); layout.total];
        let blocks = config.blocks()?;
        for (l, b) in blocks.iter().enumerate() {
            let o = layout.conv[l];
            let wlen = b.c_out * b.c_in * b.kt * b.kf;
            uniform(&mut rng, &mut values[o.w..o.w + wlen], 1.0 / ((b.c_in * b.kt * b.kf) as f64).sqrt());
            values[o.gamma..o.gamma + b.c_out].fill(S::one());
        }
        let h = config.lstm_hidden;
        let bound = 1.0 / (h as f64).sqrt();
        for dirs in &layout.lstm {
            for o in dirs {
                uniform(&mut rng, &mut values[o.w_ih..o.w_ih + 4 * h * o.input], bound);
                uniform(&mut rng, &mut values[o.w_hh..o.w_hh + 4 * h * h], bound);
                values[o.bias + h..o.bias + 2 * h].fill(S::one());
            }
        }
        let fan = 1.0 / ((2 * h) as f64).sqrt();
        uniform(&mut rng, &mut values[layout.head_w..layout.head_w + config.n_classes * 2 * h], fan);
        if let (Some((w, _)), Some(d)) = (layout.dom, config.domain_branch) {
            uniform(&mut rng, &mut values[w..w + d.n_domains * 2 * h], fan);
        }
        let mut buffers = vec![S::zero(); layout.buffers];
        for (l, b) in blocks.iter().enumerate() {
            let (_, var) = layout.bn_buf[l];
            buffers[var..var + b.c_out].fill(S::one());
        }
        Ok(Self { config: config.clone(), values, buffers, layout })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.layout.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.layout.segments.iter().find(|s| s.name == name)
    }

    pub fn n_trainable(&self) -> usize {
        self.values.len()
    }

    /// Whether a flat index belongs to the domain head.
    pub fn is_domain_head(&self, idx: usize) -> bool {
        self.layout.dom.is_some_and(|(w, _)| idx >= w)
    }

    pub fn cast<T: Scalar>(&self) -> Parameters<T> {
        Parameters {
            config: self.config.clone(),
            values: self.values.iter().map(|v| T::of(v.f64())).collect(),
            buffers: self.buffers.iter().map(|v| T::of(v.f64())).collect(),
            layout: self.layout.clone(),
        }
    }

    /// Copies every tensor the two configs share by name and shape.
    pub fn transplant_from(&mut self, other: &Parameters<S>) -> usize {
        let mut copied = 0;
        for seg in self.layout.segments.clone() {
            if let Some(src) = other.segment(&seg.name).filter(|s| s.shape == seg.shape) {
                self.values[seg.offset..seg.offset + seg.len]
                    .copy_from_slice(&other.values[src.offset..src.offset + src.len]);
                copied += 1;
            }
        }
        if self.buffers.len() == other.buffers.len() {
            self.buffers.copy_from_slice(&other.buffers);
        }
        copied
    }
}

/// JSON manifest stored beside the weight tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub n_trainable: usize,
    pub n_buffers: usize,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default)]
    pub history: serde_json::Value,
}

impl<S: Scalar> Parameters<S> {
    pub fn manifest(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            n_trainable: self.values.len(),
            n_buffers: self.buffers.len(),
            segments: self.layout.segments.clone(),
            classes: Vec::new(),
            seed: 0,
            epochs: 0,
            history: serde_json::Value::Null,
        }
    }

    /// Writes `path` (weights then buffers, rank-1 f32) and its JSON sidecar.
    pub fn save(&self, path: &Path, manifest: &Checkpoint) -> Result<()> {
        let data: Vec<S> = self.values.iter().chain(&self.buffers).copied().collect();
        Tensor::new(vec![data.len() as u64], &data)?.write(path)?;
        std::fs::write(crate::dataset::sidecar_path(path), serde_json::to_string_pretty(manifest)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, Checkpoint)> {
        let text = std::fs::read_to_string(crate::dataset::sidecar_path(path))?;
        let manifest: Checkpoint = serde_json::from_str(&text)?;
        let tensor = Tensor::read(path)?;
        let layout = Layout::new(&manifest.config)?;
        if tensor.data.len() != layout.total + layout.buffers || manifest.n_trainable != layout.total {
            return Err(ModelError::Checkpoint(format!(
                "expected {} values for this config, found {}",
                layout.total + layout.buffers,
                tensor.data.len()
            )));
        }
        let all: Vec<S> = tensor.to_scalars();
        let values = all[..layout.total].to_vec();
        let buffers = all[layout.total..].to_vec();
        Ok((Self { config: manifest.config.clone(), values, buffers, layout }, manifest))
    }
}
