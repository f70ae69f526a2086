use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{cluster_separability, distribution_divergence, output_distribution};
use super::{Result, ShiftError};
use crate::dataset::{split_by, stratified_split, LabeledDataset, PartitionSpec};
use crate::embed::{tsne, EmbedConfig};
use crate::model::{
    evaluate, features, few_shot_adapt, select_support, train_with, EvalResult, GrlSchedule, History, ModelConfig,
    Parameters, TrainConfig, TrainSetup,
};
use crate::spectro::ActivitySample;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Plain supervised training on the seen side.
    Vanilla,
    /// Adds a source/target domain head behind gradient reversal, fed with
    /// unlabeled shifted-side inputs.
    Grl,
    /// Fine-tunes the vanilla model on `k_shot` labeled shifted-side samples per class.
    KShot,
}

/// What the GRL strategy's domain head is asked to tell apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrlDomains {
    /// Seen side versus shifted side.
    #[default]
    SourceTarget,
    /// Every environment (or person) is its own domain; by-time falls back to source/target.
    PerGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftOptions {
    pub strategies: Vec<Strategy>,
    pub k_shot: usize,
    pub adapt: TrainConfig,
    pub grl: GrlSchedule,
    pub grl_domains: GrlDomains,
    /// Share of the seen side held out to measure seen accuracy.
    pub seen_fraction: f64,
    pub embed: EmbedConfig,
    pub embed_points: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Vanilla, Strategy::Grl, Strategy::KShot],
            k_shot: 5,
            adapt: TrainConfig { epochs: 20, val_fraction: 0.0, ..TrainConfig::default() },
            grl: GrlSchedule::Fixed { lambda: 0.1 },
            grl_domains: GrlDomains::default(),
            seen_fraction: 0.2,
            embed: EmbedConfig { n_iter: 500, ..EmbedConfig::default() },
            embed_points: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub seen: EvalResult,
    pub unseen: EvalResult,
    pub seen_accuracy: f64,
    pub unseen_accuracy: f64,
    /// Percentage points, seen minus unseen.
    pub accuracy_drop: f64,
    pub p_train: Vec<Vec<f64>>,
    pub p_test: Vec<Vec<f64>>,
    pub output_divergence: f64,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub points: Vec<f64>,
    /// Partition factor of each point (environment, person, or time half).
    pub groups: Vec<usize>,
    pub labels: Vec<usize>,
    pub final_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub partition: PartitionSpec,
    pub classes: Vec<String>,
    pub seed: u64,
    pub n_fit: usize,
    pub n_seen_test: usize,
    pub n_unseen_test: usize,
    pub n_support: usize,
    pub strategies: Vec<StrategyResult>,
    /// Silhouette of the vanilla model's features, grouped by partition factor.
    pub embedding_separability: f64,
    pub embedding: EmbeddingSummary,
}

impl ShiftReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyResult> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

/// `true\predicted` header row, then one row per true class.
pub fn confusion_csv(classes: &[String], confusion: &[Vec<u64>]) -> String {
    let mut out = String::from("true\\predicted");
    for c in classes {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (c, row) in classes.iter().zip(confusion) {
        out.push_str(c);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Domain ids for the labeled and unlabeled GRL inputs, and their count.
fn grl_domain_labels<S>(
    partition: &PartitionSpec,
    kind: GrlDomains,
    labeled: &[&ActivitySample<S>],
    unlabeled: &[&ActivitySample<S>],
) -> (Vec<usize>, Vec<usize>, usize) {
    let key = |s: &ActivitySample<S>| match partition {
        PartitionSpec::ByEnvironment { .. } => Some(s.domain.env_id),
        PartitionSpec::ByPerson { .. } => Some(s.domain.person_id),
        PartitionSpec::ByTime { .. } => None,
    };
    if kind == GrlDomains::SourceTarget || labeled.first().and_then(|s| key(s)).is_none() {
        return (vec![0; labeled.len()], vec![1; unlabeled.len()], 2);
    }
    let ids: std::collections::BTreeSet<u32> = labeled.iter().chain(unlabeled).filter_map(|s| key(s)).collect();
    let index = |s: &ActivitySample<S>| ids.iter().position(|&i| Some(i) == key(s)).unwrap();
    (labeled.iter().map(|s| index(s)).collect(), unlabeled.iter().map(|s| index(s)).collect(), ids.len())
}

fn pick<'a, S>(ds: &'a LabeledDataset<S>, idx: &[usize]) -> Vec<&'a ActivitySample<S>> {
    idx.iter().map(|&i| &ds.samples[i]).collect()
}

fn assess<S: Scalar>(
    strategy: Strategy,
    params: &Parameters<S>,
    history: History,
    fit: &[&ActivitySample<S>],
    seen: &[&ActivitySample<S>],
    unseen: &[&ActivitySample<S>],
) -> Result<StrategyResult> {
    let seen_eval = evaluate(params, seen)?;
    let unseen_eval = evaluate(params, unseen)?;
    let p_train = output_distribution(params, fit)?;
    let p_test = unseen_eval.mean_softmax.clone();
    let output_divergence = distribution_divergence(&p_train, &p_test)?;
    Ok(StrategyResult {
        strategy,
        seen_accuracy: seen_eval.accuracy,
        unseen_accuracy: unseen_eval.accuracy,
        accuracy_drop: 100.0 * (seen_eval.accuracy - unseen_eval.accuracy),
        seen: seen_eval,
        unseen: unseen_eval,
        p_train,
        p_test,
        output_divergence,
        history,
    })
}

/// Trains every requested strategy on the seen side of `partition` and
/// evaluates each on a held-out seen slice and on the shifted side. All
/// strategies share the data split, the initial weights and the evaluation
/// sets; with k-shot requested, its support samples are excluded from every
/// strategy's shifted-side evaluation.
pub fn run_shift_experiment<S: Scalar>(
    ds: &LabeledDataset<S>,
    partition: &PartitionSpec,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    opts: &ShiftOptions,
) -> Result<ShiftReport> {
    if opts.strategies.is_empty() {
        return Err(ShiftError::NoStrategies);
    }
    let seed = train_config.seed;
    let split = split_by(ds, partition)?;
    let labels = ds.labels();
    let (fit_idx, seen_idx) = stratified_split(&split.train, &labels, opts.seen_fraction, seed);
    let fit = pick(ds, &fit_idx);
    let seen = pick(ds, &seen_idx);
    let shifted = pick(ds, &split.test);
    let (support, unseen) = if opts.strategies.contains(&Strategy::KShot) {
        let (s, rest) = select_support(&shifted, opts.k_shot, ds.n_classes(), seed)?;
        (s.iter().map(|&i| shifted[i]).collect(), rest.iter().map(|&i| shifted[i]).collect())
    } else {
        (Vec::new(), shifted.clone())
    };
    let base_cfg = ModelConfig { domain_branch: None, ..model_config.clone() };

    log::info!("{}: training vanilla on {} samples", partition.kind_name(), fit.len());
    let mut setup = TrainSetup::supervised(fit.clone());
    setup.validation = seen.clone();
    let (vanilla, vanilla_hist) = train_with(Parameters::init(&base_cfg, seed)?, &setup, train_config)?;

    let mut results = Vec::new();
    for &strategy in &opts.strategies {
        let (params, history) = match strategy {
            Strategy::Vanilla => (vanilla.clone(), vanilla_hist.clone()),
            Strategy::Grl => {
                log::info!("{}: training with gradient reversal", partition.kind_name());
                let (labeled_domains, unlabeled_domains, n_domains) = grl_domain_labels(partition, opts.grl_domains, &fit, &shifted);
                let cfg = base_cfg.clone().with_domain_branch(n_domains, opts.grl);
                let setup = TrainSetup {
                    labeled: fit.clone(),
                    labeled_domains,
                    unlabeled: shifted.clone(),
                    unlabeled_domains,
                    validation: seen.clone(),
                };
                train_with(Parameters::init(&cfg, seed)?, &setup, train_config)?
            }
            Strategy::KShot => {
                log::info!("{}: fine-tuning on {} support samples", partition.kind_name(), support.len());
                let adapt = TrainConfig { seed, ..opts.adapt.clone() };
                few_shot_adapt(&vanilla, &support, &adapt)?
            }
        };
        results.push(assess(strategy, &params, history, &fit, &seen, &unseen)?);
    }

    let mut pool: Vec<&ActivitySample<S>> = seen.iter().chain(&unseen).copied().collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xe3b));
    pool.truncate(opts.embed_points.max(4));
    let group_of = |s: &ActivitySample<S>| -> usize {
        match partition {
            PartitionSpec::ByEnvironment { .. } => s.domain.env_id as usize,
            PartitionSpec::ByPerson { .. } => s.domain.person_id as usize,
            PartitionSpec::ByTime { .. } => usize::from(!seen.iter().any(|x| std::ptr::eq(*x, s))),
        }
    };
    let groups: Vec<usize> = pool.iter().map(|s| group_of(s)).collect();
    let z = features(&vanilla, &pool)?;
    let z64: Vec<f64> = z.iter().map(|v| v.f64()).collect();
    let cfg = EmbedConfig { seed, ..opts.embed.clone() }.clamped_for(pool.len());
    let emb = tsne(&z64, pool.len(), base_cfg.feature_len(), &cfg)?;
    let embedding_separability = cluster_separability(&emb.points, &groups)?;

    Ok(ShiftReport {
        partition: partition.clone(),
        classes: ds.classes.clone(),
        seed,
        n_fit: fit.len(),
        n_seen_test: seen.len(),
        n_unseen_test: unseen.len(),
        n_support: support.len(),
        strategies: results,
        embedding_separability,
        embedding: EmbeddingSummary {
            points: emb.points,
            groups,
            labels: pool.iter().map(|s| s.label).collect(),
            final_kl: emb.final_kl,
        },
    })
}
