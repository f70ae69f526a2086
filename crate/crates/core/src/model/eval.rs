use serde::{Deserialize, Serialize};

use super::network::{forward, Batch, Mode};
use super::params::Parameters;
use super::{ModelError, Result};
use crate::spectro::ActivitySample;
use crate::Scalar;

const EVAL_BATCH: usize = 32;

/// Numerically stable softmax, computed in f64.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<f64> {
    let m = logits.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v.f64() - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// `confusion[true][predicted]` counts from `[n, k]` logits.
pub fn confusion_from_logits<S: Scalar>(logits: &[S], k: usize, labels: &[usize]) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; k]; k];
    for (i, &y) in labels.iter().enumerate() {
        m[y][argmax(&logits[i * k..][..k])] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    /// Mean softmax vector over the samples of each true class.
    pub mean_softmax: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
}

fn batched<S: Scalar>(
    params: &Parameters<S>,
    samples: &[&ActivitySample<S>],
    mut f: impl FnMut(&[&ActivitySample<S>], super::ForwardOutput<S>),
) -> Result<()> {
    for chunk in samples.chunks(EVAL_BATCH) {
        let batch = Batch::from_samples(chunk, &params.config)?;
        f(chunk, forward(params, &batch, Mode::Eval)?);
    }
    Ok(())
}

pub fn evaluate<S: Scalar>(params: &Parameters<S>, samples: &[&ActivitySample<S>]) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let k = params.config.n_classes;
    let mut confusion = vec![vec![0u64; k]; k];
    let mut sums = vec![vec![0.0; k]; k];
    let mut predictions = Vec::with_capacity(samples.len());
    let mut err = None;
    batched(params, samples, |chunk, out| {
        for (i, s) in chunk.iter().enumerate() {
            if s.label >= k {
                err = Some(ModelError::LabelOutOfRange { label: s.label, n: k });
                return;
            }
            let row = &out.class_logits[i * k..][..k];
            let p = argmax(row);
            confusion[s.label][p] += 1;
            predictions.push(p);
            for (acc, v) in sums[s.label].iter_mut().zip(softmax(row)) {
                *acc += v;
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let mean_softmax = sums
        .into_iter()
        .zip(&confusion)
        .map(|(row, conf)| {
            let n: u64 = conf.iter().sum();
            row.into_iter().map(|v| if n == 0 { 0.0 } else { v / n as f64 }).collect()
        })
        .collect();
    Ok(EvalResult { n: samples.len(), accuracy: correct as f64 / samples.len() as f64, confusion, mean_softmax, predictions })
}

/// Final-step LSTM features, `[n, 2 * hidden]`, in eval mode.
pub fn features<S: Scalar>(params: &Parameters<S>, samples: &[&ActivitySample<S>]) -> Result<Vec<S>> {
    let mut out = Vec::with_capacity(samples.len() * params.config.feature_len());
    batched(params, samples, |_, o| out.extend_from_slice(&o.features))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_and_survives_large_logits() {
        for logits in [vec![1.0f64, 2.0, 3.0], vec![1000.0, 1001.0, -1000.0], vec![-800.0, -800.0]] {
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn confusion_is_invariant_to_positive_scaling() {
        let logits: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let labels: Vec<usize> = (0..10).map(|i| i % 4).collect();
        let base = confusion_from_logits(&logits, 4, &labels);
        for k in [0.001, 0.5, 3.0, 1e6] {
            let scaled: Vec<f64> = logits.iter().map(|v| v * k).collect();
            assert_eq!(confusion_from_logits(&scaled, 4, &labels), base);
        }
    }
}
