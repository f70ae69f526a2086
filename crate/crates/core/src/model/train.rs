use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::ModelConfig;
use super::eval::evaluate;
use super::network::{loss_and_grad, Batch, Target};
use super::params::Parameters;
use super::{ModelError, Result};
use crate::dataset::stratified_split;
use crate::spectro::ActivitySample;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    /// Stratified share of the labeled data held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 16,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub class_loss: f64,
    pub domain_loss: f64,
    pub grl_lambda: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.class_loss)
    }
}

/// Inputs to one training run.
pub struct TrainSetup<'a, S> {
    pub labeled: Vec<&'a ActivitySample<S>>,
    /// Domain index per labeled sample; used only with a domain branch.
    pub labeled_domains: Vec<usize>,
    /// Samples that feed only the domain loss.
    pub unlabeled: Vec<&'a ActivitySample<S>>,
    pub unlabeled_domains: Vec<usize>,
    pub validation: Vec<&'a ActivitySample<S>>,
}

impl<'a, S> TrainSetup<'a, S> {
    pub fn supervised(labeled: Vec<&'a ActivitySample<S>>) -> Self {
        Self { labeled, labeled_domains: Vec::new(), unlabeled: Vec::new(), unlabeled_domains: Vec::new(), validation: Vec::new() }
    }
}

/// Initializes from `config`, holds out `val_fraction` per class and trains.
pub fn train<S: Scalar>(
    config: &ModelConfig,
    samples: &[&ActivitySample<S>],
    tc: &TrainConfig,
) -> Result<(Parameters<S>, History)> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (tr, val) = stratified_split(&idx, &labels, tc.val_fraction, tc.seed);
    let mut setup = TrainSetup::supervised(tr.iter().map(|&i| samples[i]).collect());
    setup.validation = val.iter().map(|&i| samples[i]).collect();
    let params = Parameters::init(config, tc.seed)?;
    train_with(params, &setup, tc)
}

/// Runs `tc.epochs` epochs of Adam from `params`. When the model has a domain
/// branch and `labeled_domains` is filled, every step also feeds a batch of
/// unlabeled samples to the domain loss.
pub fn train_with<S: Scalar>(
    mut params: Parameters<S>,
    setup: &TrainSetup<S>,
    tc: &TrainConfig,
) -> Result<(Parameters<S>, History)> {
    if setup.labeled.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if tc.batch_size == 0 {
        return Err(ModelError::Config("batch_size must be >= 1".into()));
    }
    let branch = params.config.domain_branch;
    let use_domain = branch.is_some() && !setup.labeled_domains.is_empty();
    if use_domain
        && (setup.labeled_domains.len() != setup.labeled.len() || setup.unlabeled_domains.len() != setup.unlabeled.len())
    {
        return Err(ModelError::ShapeMismatch("domain labels must accompany every sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed_0f_0d3e);
    let mut opt = Adam::new(params.n_trainable(), tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..setup.labeled.len()).collect();
    let mut u_order: Vec<usize> = (0..setup.unlabeled.len()).collect();
    let mut u_pos = u_order.len();
    for epoch in 0..tc.epochs {
        let lambda = branch.map_or(0.0, |b| b.grl.lambda_at(epoch));
        order.shuffle(&mut rng);
        let (mut closs, mut dloss, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(tc.batch_size) {
            let mut samples: Vec<&ActivitySample<S>> = chunk.iter().map(|&i| setup.labeled[i]).collect();
            let mut targets: Vec<Target> = chunk
                .iter()
                .map(|&i| Target {
                    class: Some(setup.labeled[i].label),
                    domain: use_domain.then(|| setup.labeled_domains[i]),
                })
                .collect();
            if use_domain && !u_order.is_empty() {
                for _ in 0..chunk.len() {
                    if u_pos == u_order.len() {
                        u_order.shuffle(&mut rng);
                        u_pos = 0;
                    }
                    let j = u_order[u_pos];
                    u_pos += 1;
                    samples.push(setup.unlabeled[j]);
                    targets.push(Target { class: None, domain: Some(setup.unlabeled_domains[j]) });
                }
            }
            let batch = Batch::from_samples(&samples, &params.config)?;
            let g = loss_and_grad(&params, &batch, &targets, lambda)?;
            opt.step(&mut params.values, &g.values);
            params.update_running(&g.bn_stats);
            closs += g.class_loss;
            dloss += g.domain_loss;
            steps += 1;
        }
        let val_accuracy = if setup.validation.is_empty() {
            None
        } else {
            Some(evaluate(&params, &setup.validation)?.accuracy)
        };
        let rec = EpochRecord {
            epoch,
            class_loss: closs / steps as f64,
            domain_loss: dloss / steps as f64,
            grl_lambda: lambda,
            val_accuracy,
        };
        log::debug!("epoch {epoch}: loss {:.4} domain {:.4} val {:?}", rec.class_loss, rec.domain_loss, rec.val_accuracy);
        history.epochs.push(rec);
    }
    Ok((params, history))
}

/// Picks up to `k` samples per class, seeded. Returns (support, rest) as
/// indices into `samples`.
pub fn select_support<S>(
    samples: &[&ActivitySample<S>],
    k: usize,
    n_classes: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut support, mut rest) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == c).collect();
        if members.is_empty() || k == 0 {
            return Err(ModelError::MissingClassInSupport(c));
        }
        members.shuffle(&mut rng);
        let take = k.min(members.len());
        support.extend_from_slice(&members[..take]);
        rest.extend_from_slice(&members[take..]);
    }
    support.sort_unstable();
    rest.sort_unstable();
    Ok((support, rest))
}

/// Fine-tunes every layer on a labeled support set covering all classes.
pub fn few_shot_adapt<S: Scalar>(
    params: &Parameters<S>,
    support: &[&ActivitySample<S>],
    tc: &TrainConfig,
) -> Result<(Parameters<S>, History)> {
    for c in 0..params.config.n_classes {
        if !support.iter().any(|s| s.label == c) {
            return Err(ModelError::MissingClassInSupport(c));
        }
    }
    train_with(params.clone(), &TrainSetup::supervised(support.to_vec()), tc)
}
