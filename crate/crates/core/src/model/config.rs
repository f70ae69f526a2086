use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::spectro::N_DATA_SUBCARRIERS;

/// Gradient-reversal strength over training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrlSchedule {
    Fixed { lambda: f64 },
    /// Linear ramp from 0 to `lambda` over the first `warmup_epochs`.
    LinearWarmup { lambda: f64, warmup_epochs: usize },
}

impl Default for GrlSchedule {
    fn default() -> Self {
        GrlSchedule::Fixed { lambda: 1.0 }
    }
}

impl GrlSchedule {
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        match *self {
            GrlSchedule::Fixed { lambda } => lambda,
            GrlSchedule::LinearWarmup { lambda, warmup_epochs } => {
                if warmup_epochs == 0 {
                    lambda
                } else {
                    lambda * (epoch as f64 / warmup_epochs as f64).min(1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBranch {
    pub n_domains: usize,
    #[serde(default)]
    pub grl: GrlSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Receive antennas; each becomes an input channel.
    pub in_channels: usize,
    /// Packets per window.
    pub time_len: usize,
    pub n_subcarriers: usize,
    pub conv_channels: [usize; 3],
    /// (time, subcarrier) kernel extents, "same" padding.
    pub kernels: [(usize, usize); 3],
    /// (time, subcarrier) max-pool extents, floor division.
    pub pools: [(usize, usize); 3],
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub n_classes: usize,
    #[serde(default)]
    pub domain_branch: Option<DomainBranch>,
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
    #[serde(default = "default_bn_eps")]
    pub bn_eps: f64,
}

fn default_bn_momentum() -> f64 {
    0.1
}

fn default_bn_eps() -> f64 {
    1e-5
}

/// Geometry of one conv block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub c_in: usize,
    pub c_out: usize,
    pub kt: usize,
    pub kf: usize,
    pub t_in: usize,
    pub f_in: usize,
    pub pt: usize,
    pub pf: usize,
    pub t_out: usize,
    pub f_out: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full_preset()
    }
}

impl ModelConfig {
    /// Widths sized to land near 1.77M trainable parameters on a
    /// 400-packet, single-antenna, 242-subcarrier window.
    pub fn full_preset() -> Self {
        Self {
            in_channels: 1,
            time_len: 400,
            n_subcarriers: N_DATA_SUBCARRIERS,
            conv_channels: [16, 32, 64],
            kernels: [(3, 3); 3],
            pools: [(2, 2), (2, 2), (2, 5)],
            lstm_hidden: 128,
            lstm_layers: 3,
            n_classes: 10,
            domain_branch: None,
            bn_momentum: default_bn_momentum(),
            bn_eps: default_bn_eps(),
        }
    }

    /// Small network used by the synthetic shift benchmark.
    pub fn bench_preset(time_len: usize) -> Self {
        Self {
            in_channels: 1,
            time_len,
            n_subcarriers: N_DATA_SUBCARRIERS,
            conv_channels: [4, 8, 8],
            kernels: [(3, 3); 3],
            pools: [(2, 4), (2, 4), (2, 2)],
            lstm_hidden: 16,
            lstm_layers: 3,
            n_classes: 10,
            domain_branch: None,
            bn_momentum: default_bn_momentum(),
            bn_eps: default_bn_eps(),
        }
    }

    pub fn with_domain_branch(mut self, n_domains: usize, grl: GrlSchedule) -> Self {
        self.domain_branch = Some(DomainBranch { n_domains, grl });
        self
    }

    pub fn blocks(&self) -> Result<[BlockShape; 3]> {
        let mut c_in = self.in_channels;
        let (mut t, mut f) = (self.time_len, self.n_subcarriers);
        let mut out = [BlockShape { c_in: 0, c_out: 0, kt: 0, kf: 0, t_in: 0, f_in: 0, pt: 0, pf: 0, t_out: 0, f_out: 0 }; 3];
        for (l, slot) in out.iter_mut().enumerate() {
            let (kt, kf) = self.kernels[l];
            let (pt, pf) = self.pools[l];
            let c_out = self.conv_channels[l];
            if [kt, kf, pt, pf, c_out].contains(&0) {
                return Err(ModelError::Config(format!("block {l} has a zero extent")));
            }
            let (t_out, f_out) = (t / pt, f / pf);
            if t_out == 0 || f_out == 0 {
                return Err(ModelError::Config(format!("block {l} pools {t}x{f} down to nothing")));
            }
            *slot = BlockShape { c_in, c_out, kt, kf, t_in: t, f_in: f, pt, pf, t_out, f_out };
            c_in = c_out;
            t = t_out;
            f = f_out;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.time_len == 0 || self.n_subcarriers == 0 {
            return Err(ModelError::Config("input extents must be >= 1".into()));
        }
        if self.lstm_hidden == 0 || self.lstm_layers == 0 || self.n_classes < 2 {
            return Err(ModelError::Config("need lstm_hidden >= 1, lstm_layers >= 1, n_classes >= 2".into()));
        }
        if let Some(d) = self.domain_branch {
            if d.n_domains < 2 {
                return Err(ModelError::Config("domain branch needs >= 2 domains".into()));
            }
        }
        self.blocks().map(|_| ())
    }

    /// LSTM sequence length and per-step input width after the conv stack.
    pub fn sequence_shape(&self) -> Result<(usize, usize)> {
        let b = self.blocks()?[2];
        Ok((b.t_out, b.c_out * b.f_out))
    }

    pub fn feature_len(&self) -> usize {
        2 * self.lstm_hidden
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.time_len * self.n_subcarriers
    }

    /// Trainable parameter count, computed from the config alone.
    pub fn param_count(&self) -> Result<usize> {
        self.validate()?;
        let mut n = 0;
        for b in self.blocks()? {
            n += b.c_out * b.c_in * b.kt * b.kf + b.c_out; // conv
            n += 2 * b.c_out; // batch-norm scale/shift
        }
        let h = self.lstm_hidden;
        let mut input = self.sequence_shape()?.1;
        for _ in 0..self.lstm_layers {
            n += 2 * (4 * h * input + 4 * h * h + 4 * h);
            input = 2 * h;
        }
        n += self.n_classes * 2 * h + self.n_classes;
        if let Some(d) = self.domain_branch {
            n += d.n_domains * 2 * h + d.n_domains;
        }
        Ok(n)
    }

    /// Non-trainable batch-norm running statistics.
    pub fn buffer_count(&self) -> usize {
        2 * self.conv_channels.iter().sum::<usize>()
    }
}
