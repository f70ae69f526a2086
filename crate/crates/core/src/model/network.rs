use super::config::{BlockShape, ModelConfig};
use super::layers::{
    conv_backward, conv_forward, crop_padded, dense, dense_backward, pad_input, relu_pool, relu_pool_backward,
    GradientReversal,
};
use super::lstm::{lstm_backward, lstm_forward, LstmGrads, LstmTrace, LstmWeights};
use super::params::Parameters;
use super::{ModelError, Result};
use crate::spectro::ActivitySample;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch-norm uses batch statistics.
    Train,
    /// Batch-norm uses running statistics; samples are independent.
    Eval,
}

/// Input tensor `[n, channels, time, subcarriers]`.
#[derive(Debug, Clone)]
pub struct Batch<S> {
    pub n: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Batch<S> {
    /// Antenna `a` of packet `t` becomes channel `a`, row `t`.
    pub fn from_samples(samples: &[&ActivitySample<S>], cfg: &ModelConfig) -> Result<Self> {
        let (t_n, a_n, f_n) = (cfg.time_len, cfg.in_channels, cfg.n_subcarriers);
        let mut data = Vec::with_capacity(samples.len() * cfg.input_len());
        for s in samples {
            let w = &s.window;
            if (w.n_packets, w.n_ant, w.n_cols) != (t_n, a_n, f_n) {
                return Err(ModelError::ShapeMismatch(format!(
                    "window is {}x{}x{}, model expects {t_n}x{a_n}x{f_n}",
                    w.n_packets, w.n_ant, w.n_cols
                )));
            }
            for a in 0..a_n {
                for t in 0..t_n {
                    data.extend_from_slice(w.row(t * a_n + a));
                }
            }
        }
        Ok(Self { n: samples.len(), data })
    }

    pub fn from_raw(n: usize, data: Vec<S>, cfg: &ModelConfig) -> Result<Self> {
        if data.len() != n * cfg.input_len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} values for {n} inputs of {}",
                data.len(),
                cfg.input_len()
            )));
        }
        Ok(Self { n, data })
    }
}

/// Supervision for one sample. Unlabeled target samples carry only a domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Target {
    pub class: Option<usize>,
    pub domain: Option<usize>,
}

impl Target {
    pub fn class(label: usize) -> Self {
        Self { class: Some(label), domain: None }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<S> {
    pub n: usize,
    /// `[n, n_classes]` pre-softmax scores.
    pub class_logits: Vec<S>,
    /// `[n, 2 * hidden]`, the final forward and backward LSTM states.
    pub features: Vec<S>,
    pub domain_logits: Option<Vec<S>>,
}

#[derive(Debug, Clone)]
pub struct Gradients<S> {
    pub values: Vec<S>,
    pub class_loss: f64,
    pub domain_loss: f64,
    pub n_class: usize,
    pub n_domain: usize,
    /// Per-block batch (mean, biased variance), for running-stat updates.
    pub bn_stats: Vec<(Vec<S>, Vec<S>)>,
}

struct BlockTrace<S> {
    padded: Vec<S>,
    xhat: Vec<S>,
    y: Vec<S>,
    argmax: Vec<u32>,
    inv_std: Vec<S>,
    mean: Vec<S>,
    var: Vec<S>,
}

struct Trace<S> {
    blocks: Vec<BlockTrace<S>>,
    /// Per LSTM layer, `[n, T, in]`.
    seq: Vec<Vec<S>>,
    /// Per LSTM layer per sample, forward and backward traces.
    lstm: Vec<Vec<[LstmTrace<S>; 2]>>,
    features: Vec<S>,
    class_logits: Vec<S>,
    domain_logits: Option<Vec<S>>,
}

fn block_forward<S: Scalar>(
    p: &Parameters<S>,
    l: usize,
    s: &BlockShape,
    n: usize,
    input: &[S],
    mode: Mode,
) -> (BlockTrace<S>, Vec<S>) {
    let o = p.layout.conv[l];
    let v = &p.values;
    let wlen = s.c_out * s.c_in * s.kt * s.kf;
    let (w, b) = (&v[o.w..o.w + wlen], &v[o.b..o.b + s.c_out]);
    let in_len = s.c_in * s.plane();
    let plane = s.plane();
    let z_len = s.c_out * plane;
    let mut padded = vec![S::zero(); n * s.padded_len()];
    let mut z = vec![S::zero(); n * z_len];
    for i in 0..n {
        let pd = &mut padded[i * s.padded_len()..][..s.padded_len()];
        pad_input(&input[i * in_len..][..in_len], s, pd);
        conv_forward(pd, w, b, s, &mut z[i * z_len..][..z_len]);
    }
    let (mean, var) = match mode {
        Mode::Train => {
            let m = (n * plane) as f64;
            let mut mean = vec![S::zero(); s.c_out];
            let mut var = vec![S::zero(); s.c_out];
            for c in 0..s.c_out {
                let chunks = (0..n).map(|i| &z[i * z_len + c * plane..][..plane]);
                let mu = chunks.clone().flatten().map(|x| x.f64()).sum::<f64>() / m;
                let sq = chunks.flatten().map(|x| (x.f64() - mu).powi(2)).sum::<f64>() / m;
                mean[c] = S::of(mu);
                var[c] = S::of(sq);
            }
            (mean, var)
        }
        Mode::Eval => {
            let (rm, rv) = p.layout.bn_buf[l];
            (p.buffers[rm..rm + s.c_out].to_vec(), p.buffers[rv..rv + s.c_out].to_vec())
        }
    };
    let eps = S::of(p.config.bn_eps);
    let inv_std: Vec<S> = var.iter().map(|&x| S::one() / (x + eps).sqrt()).collect();
    let gamma = &v[o.gamma..o.gamma + s.c_out];
    let beta = &v[o.beta..o.beta + s.c_out];
    let mut xhat = z;
    let mut y = vec![S::zero(); n * z_len];
    for i in 0..n {
        for c in 0..s.c_out {
            let r = i * z_len + c * plane..i * z_len + (c + 1) * plane;
            for (xh, yy) in xhat[r.clone()].iter_mut().zip(&mut y[r]) {
                *xh = (*xh - mean[c]) * inv_std[c];
                *yy = gamma[c] * *xh + beta[c];
            }
        }
    }
    let mut out = vec![S::zero(); n * s.out_len()];
    let mut argmax = vec![0u32; n * s.out_len()];
    for i in 0..n {
        relu_pool(
            &y[i * z_len..][..z_len],
            s,
            &mut out[i * s.out_len()..][..s.out_len()],
            &mut argmax[i * s.out_len()..][..s.out_len()],
        );
    }
    (BlockTrace { padded, xhat, y, argmax, inv_std, mean, var }, out)
}

fn lstm_weights<'a, S: Scalar>(p: &'a Parameters<S>, l: usize, d: usize) -> LstmWeights<'a, S> {
    let o = p.layout.lstm[l][d];
    let h = p.config.lstm_hidden;
    let v = &p.values;
    LstmWeights {
        w_ih: &v[o.w_ih..o.w_ih + 4 * h * o.input],
        w_hh: &v[o.w_hh..o.w_hh + 4 * h * h],
        bias: &v[o.bias..o.bias + 4 * h],
        input: o.input,
        hidden: h,
    }
}

fn run<S: Scalar>(p: &Parameters<S>, batch: &Batch<S>, mode: Mode) -> Result<Trace<S>> {
    let cfg = &p.config;
    if batch.data.len() != batch.n * cfg.input_len() {
        return Err(ModelError::ShapeMismatch("batch does not match model input".into()));
    }
    let n = batch.n;
    let shapes = cfg.blocks()?;
    let mut blocks = Vec::with_capacity(3);
    let mut act = batch.data.clone();
    for (l, s) in shapes.iter().enumerate() {
        let (tr, out) = block_forward(p, l, s, n, &act, mode);
        blocks.push(tr);
        act = out;
    }
    let last = shapes[2];
    let (t_n, i_n) = (last.t_out, last.c_out * last.f_out);
    let mut x = vec![S::zero(); n * t_n * i_n];
    for i in 0..n {
        for c in 0..last.c_out {
            for t in 0..t_n {
                let src = &act[i * last.out_len() + (c * t_n + t) * last.f_out..][..last.f_out];
                x[(i * t_n + t) * i_n + c * last.f_out..][..last.f_out].copy_from_slice(src);
            }
        }
    }
    let h = cfg.lstm_hidden;
    let mut seq = Vec::with_capacity(cfg.lstm_layers);
    let mut lstm = Vec::with_capacity(cfg.lstm_layers);
    let mut width = i_n;
    for l in 0..cfg.lstm_layers {
        let wf = lstm_weights(p, l, 0);
        let wb = lstm_weights(p, l, 1);
        let mut next = vec![S::zero(); n * t_n * 2 * h];
        let mut traces = Vec::with_capacity(n);
        for i in 0..n {
            let xi = &x[i * t_n * width..][..t_n * width];
            let tf = lstm_forward(&wf, xi, t_n, false);
            let tb = lstm_forward(&wb, xi, t_n, true);
            for t in 0..t_n {
                let row = &mut next[(i * t_n + t) * 2 * h..][..2 * h];
                row[..h].copy_from_slice(&tf.h[t * h..][..h]);
                row[h..].copy_from_slice(&tb.h[t * h..][..h]);
            }
            traces.push([tf, tb]);
        }
        seq.push(std::mem::replace(&mut x, next));
        lstm.push(traces);
        width = 2 * h;
    }
    let mut features = vec![S::zero(); n * 2 * h];
    for (i, tr) in lstm.last().unwrap().iter().enumerate() {
        features[i * 2 * h..][..h].copy_from_slice(&tr[0].h[(t_n - 1) * h..][..h]);
        features[i * 2 * h + h..][..h].copy_from_slice(&tr[1].h[..h]);
    }
    let lay = &p.layout;
    let v = &p.values;
    let nc = cfg.n_classes;
    let mut class_logits = vec![S::zero(); n * nc];
    for i in 0..n {
        dense(
            &v[lay.head_w..lay.head_w + nc * 2 * h],
            &v[lay.head_b..lay.head_b + nc],
            &features[i * 2 * h..][..2 * h],
            &mut class_logits[i * nc..][..nc],
        );
    }
    let domain_logits = match (lay.dom, cfg.domain_branch) {
        (Some((dw, db)), Some(d)) => {
            let nd = d.n_domains;
            let grl = GradientReversal::new(0.0);
            let mut out = vec![S::zero(); n * nd];
            for i in 0..n {
                let z = grl.forward(&features[i * 2 * h..][..2 * h]);
                dense(&v[dw..dw + nd * 2 * h], &v[db..db + nd], &z, &mut out[i * nd..][..nd]);
            }
            Some(out)
        }
        _ => None,
    };
    Ok(Trace { blocks, seq, lstm, features, class_logits, domain_logits })
}

pub fn forward<S: Scalar>(params: &Parameters<S>, batch: &Batch<S>, mode: Mode) -> Result<ForwardOutput<S>> {
    let tr = run(params, batch, mode)?;
    Ok(ForwardOutput {
        n: batch.n,
        class_logits: tr.class_logits,
        features: tr.features,
        domain_logits: tr.domain_logits,
    })
}

/// Mean cross-entropy over the rows that carry a label; also writes
/// `(softmax - onehot) / count` into `grad` for those rows.
fn cross_entropy<S: Scalar>(
    logits: &[S],
    k: usize,
    labels: &[Option<usize>],
    mut grad: Option<&mut [S]>,
) -> Result<(f64, usize)> {
    let count = labels.iter().flatten().count();
    if count == 0 {
        return Ok((0.0, 0));
    }
    let mut total = 0.0;
    for (i, lab) in labels.iter().enumerate() {
        let Some(y) = *lab else { continue };
        if y >= k {
            return Err(ModelError::LabelOutOfRange { label: y, n: k });
        }
        let row: Vec<f64> = logits[i * k..][..k].iter().map(|v| v.f64()).collect();
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lse = m + sum.ln();
        total += lse - row[y];
        if let Some(g) = grad.as_deref_mut() {
            for j in 0..k {
                let p = (row[j] - lse).exp();
                let t = if j == y { 1.0 } else { 0.0 };
                g[i * k + j] = S::of((p - t) / count as f64);
            }
        }
    }
    let loss = total / count as f64;
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    Ok((loss, count))
}

fn check_targets<S: Scalar>(p: &Parameters<S>, batch: &Batch<S>, targets: &[Target]) -> Result<()> {
    if targets.len() != batch.n {
        return Err(ModelError::ShapeMismatch(format!("{} targets for {} inputs", targets.len(), batch.n)));
    }
    if p.config.domain_branch.is_none() && targets.iter().any(|t| t.domain.is_some()) {
        return Err(ModelError::Config("domain targets given but the model has no domain branch".into()));
    }
    Ok(())
}

/// Train-mode (class loss, domain loss) without gradients.
pub fn losses<S: Scalar>(params: &Parameters<S>, batch: &Batch<S>, targets: &[Target]) -> Result<(f64, f64)> {
    check_targets(params, batch, targets)?;
    let tr = run(params, batch, Mode::Train)?;
    let classes: Vec<_> = targets.iter().map(|t| t.class).collect();
    let (lc, _) = cross_entropy(&tr.class_logits, params.config.n_classes, &classes, None)?;
    let ld = match (&tr.domain_logits, params.config.domain_branch) {
        (Some(dl), Some(d)) => {
            let doms: Vec<_> = targets.iter().map(|t| t.domain).collect();
            cross_entropy(dl, d.n_domains, &doms, None)?.0
        }
        _ => 0.0,
    };
    Ok((lc, ld))
}

/// Class loss plus domain loss, with reversed domain gradients (scaled by
/// `grl_lambda`) reaching the shared layers. Batch-norm runs in train mode.
pub fn loss_and_grad<S: Scalar>(
    params: &Parameters<S>,
    batch: &Batch<S>,
    targets: &[Target],
    grl_lambda: f64,
) -> Result<Gradients<S>> {
    check_targets(params, batch, targets)?;
    let cfg = &params.config;
    let lay = &params.layout;
    let v = &params.values;
    let tr = run(params, batch, Mode::Train)?;
    let n = batch.n;
    let h = cfg.lstm_hidden;
    let nc = cfg.n_classes;
    let mut g = vec![S::zero(); lay.total];

    let classes: Vec<_> = targets.iter().map(|t| t.class).collect();
    let mut dlogits = vec![S::zero(); n * nc];
    let (class_loss, n_class) = cross_entropy(&tr.class_logits, nc, &classes, Some(&mut dlogits))?;
    let mut dz = vec![S::zero(); n * 2 * h];
    {
        let (gw, rest) = g[lay.head_w..].split_at_mut(nc * 2 * h);
        let gb = &mut rest[lay.head_b - lay.head_w - nc * 2 * h..][..nc];
        for i in 0..n {
            dense_backward(
                &v[lay.head_w..lay.head_w + nc * 2 * h],
                &tr.features[i * 2 * h..][..2 * h],
                &dlogits[i * nc..][..nc],
                gw,
                gb,
                &mut dz[i * 2 * h..][..2 * h],
            );
        }
    }
    let (mut domain_loss, mut n_domain) = (0.0, 0);
    if let (Some(dl), Some((dw, db)), Some(d)) = (&tr.domain_logits, lay.dom, cfg.domain_branch) {
        let nd = d.n_domains;
        let doms: Vec<_> = targets.iter().map(|t| t.domain).collect();
        let mut dd = vec![S::zero(); n * nd];
        (domain_loss, n_domain) = cross_entropy(dl, nd, &doms, Some(&mut dd))?;
        let grl = GradientReversal::new(grl_lambda);
        let (gw, rest) = g[dw..].split_at_mut(nd * 2 * h);
        let gb = &mut rest[db - dw - nd * 2 * h..][..nd];
        for i in 0..n {
            let mut dzi = vec![S::zero(); 2 * h];
            dense_backward(&v[dw..dw + nd * 2 * h], &tr.features[i * 2 * h..][..2 * h], &dd[i * nd..][..nd], gw, gb, &mut dzi);
            for (a, b) in dz[i * 2 * h..][..2 * h].iter_mut().zip(grl.backward(&dzi)) {
                *a += b;
            }
        }
    }

    let shapes = cfg.blocks()?;
    let t_n = shapes[2].t_out;
    // dh on every output of the current LSTM layer, [n, T, 2h].
    let mut dh_out = vec![S::zero(); n * t_n * 2 * h];
    for i in 0..n {
        dh_out[(i * t_n + t_n - 1) * 2 * h..][..h].copy_from_slice(&dz[i * 2 * h..][..h]);
        dh_out[i * t_n * 2 * h + h..][..h].copy_from_slice(&dz[i * 2 * h + h..][..h]);
    }
    for l in (0..cfg.lstm_layers).rev() {
        let width = lay.lstm[l][0].input;
        let x = &tr.seq[l];
        let mut dx = vec![S::zero(); n * t_n * width];
        for d in 0..2 {
            let wts = lstm_weights(params, l, d);
            let o = lay.lstm[l][d];
            let mut gw_ih = vec![S::zero(); 4 * h * width];
            let mut gw_hh = vec![S::zero(); 4 * h * h];
            let mut gbias = vec![S::zero(); 4 * h];
            for i in 0..n {
                let mut dh = vec![S::zero(); t_n * h];
                for t in 0..t_n {
                    dh[t * h..][..h].copy_from_slice(&dh_out[(i * t_n + t) * 2 * h + d * h..][..h]);
                }
                lstm_backward(
                    &wts,
                    &tr.lstm[l][i][d],
                    &x[i * t_n * width..][..t_n * width],
                    &dh,
                    t_n,
                    LstmGrads { w_ih: &mut gw_ih, w_hh: &mut gw_hh, bias: &mut gbias },
                    &mut dx[i * t_n * width..][..t_n * width],
                );
            }
            g[o.w_ih..o.w_ih + gw_ih.len()].copy_from_slice(&gw_ih);
            g[o.w_hh..o.w_hh + gw_hh.len()].copy_from_slice(&gw_hh);
            g[o.bias..o.bias + 4 * h].copy_from_slice(&gbias);
        }
        dh_out = dx;
    }

    // Undo the sequence reshape: [n, T, c*f] -> [n, c, T, f].
    let last = shapes[2];
    let mut dact = vec![S::zero(); n * last.out_len()];
    let i_n = last.c_out * last.f_out;
    for i in 0..n {
        for c in 0..last.c_out {
            for t in 0..t_n {
                dact[i * last.out_len() + (c * t_n + t) * last.f_out..][..last.f_out]
                    .copy_from_slice(&dh_out[(i * t_n + t) * i_n + c * last.f_out..][..last.f_out]);
            }
        }
    }
    for l in (0..3).rev() {
        let s = &shapes[l];
        let bt = &tr.blocks[l];
        let o = lay.conv[l];
        let plane = s.plane();
        let z_len = s.c_out * plane;
        let mut dy = vec![S::zero(); n * z_len];
        for i in 0..n {
            relu_pool_backward(
                &bt.y[i * z_len..][..z_len],
                &dact[i * s.out_len()..][..s.out_len()],
                &bt.argmax[i * s.out_len()..][..s.out_len()],
                s,
                &mut dy[i * z_len..][..z_len],
            );
        }
        // Batch-norm backward with batch statistics.
        let m = (n * plane) as f64;
        let gamma = &v[o.gamma..o.gamma + s.c_out];
        for c in 0..s.c_out {
            let (mut sum_dy, mut sum_dyx) = (0.0f64, 0.0f64);
            for i in 0..n {
                let r = i * z_len + c * plane..i * z_len + (c + 1) * plane;
                for (d, x) in dy[r.clone()].iter().zip(&bt.xhat[r]) {
                    sum_dy += d.f64();
                    sum_dyx += d.f64() * x.f64();
                }
            }
            g[o.gamma + c] = S::of(sum_dyx);
            g[o.beta + c] = S::of(sum_dy);
            let k = gamma[c] * bt.inv_std[c];
            let (mdy, mdyx) = (S::of(sum_dy / m), S::of(sum_dyx / m));
            for i in 0..n {
                let r = i * z_len + c * plane..i * z_len + (c + 1) * plane;
                for (d, &x) in dy[r.clone()].iter_mut().zip(&bt.xhat[r]) {
                    *d = k * (*d - mdy - x * mdyx);
                }
            }
        }
        let wlen = s.c_out * s.c_in * s.kt * s.kf;
        let w = &v[o.w..o.w + wlen];
        let mut gw = vec![S::zero(); wlen];
        let mut gb = vec![S::zero(); s.c_out];
        let in_len = s.c_in * plane;
        let mut dprev = if l > 0 { vec![S::zero(); n * in_len] } else { Vec::new() };
        let mut dpad = vec![S::zero(); if l > 0 { s.padded_len() } else { 0 }];
        for i in 0..n {
            let pd = &bt.padded[i * s.padded_len()..][..s.padded_len()];
            let dz_i = &dy[i * z_len..][..z_len];
            if l > 0 {
                dpad.fill(S::zero());
                conv_backward(pd, w, dz_i, s, &mut gw, &mut gb, Some(&mut dpad));
                crop_padded(&dpad, s, &mut dprev[i * in_len..][..in_len]);
            } else {
                conv_backward(pd, w, dz_i, s, &mut gw, &mut gb, None);
            }
        }
        g[o.w..o.w + wlen].copy_from_slice(&gw);
        g[o.b..o.b + s.c_out].copy_from_slice(&gb);
        dact = dprev;
    }

    let bn_stats = tr.blocks.into_iter().map(|b| (b.mean, b.var)).collect();
    Ok(Gradients { values: g, class_loss, domain_loss, n_class, n_domain, bn_stats })
}

impl<S: Scalar> Parameters<S> {
    /// Exponential moving average of batch-norm statistics.
    pub fn update_running(&mut self, stats: &[(Vec<S>, Vec<S>)]) {
        let m = S::of(self.config.bn_momentum);
        for (l, (mean, var)) in stats.iter().enumerate() {
            let (rm, rv) = self.layout.bn_buf[l];
            for (c, (&mu, &va)) in mean.iter().zip(var).enumerate() {
                let a = &mut self.buffers[rm + c];
                *a = (S::one() - m) * *a + m * mu;
                let b = &mut self.buffers[rv + c];
                *b = (S::one() - m) * *b + m * va;
            }
        }
    }
}
