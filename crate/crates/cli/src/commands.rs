use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use csishift::annotate::{
    align, read_annotations, read_frame_timestamps, to_packet_ranges, write_annotations, write_frame_timestamps,
    AnnotationRecord, DEFAULT_TOLERANCE_US,
};
use csishift::dataset::{split_by, LabeledDataset, PartitionSpec};
use csishift::embed::{tsne, EmbedConfig};
use csishift::ingest::{encode_capture, group_by_antenna, import_raw, read_capture, ImportLayout};
use csishift::model::{evaluate, features, train, Checkpoint, ModelConfig, TrainConfig};
use csishift::plot::{scatter_svg, ScatterStyle};
use csishift::shift::{confusion_csv, run_shift_experiment, ShiftOptions};
use csishift::simcsi::{BenchmarkSpec, SessionRecord, DEFAULT_CLASSES};
use csishift::spectro::{build_spectrogram, normalize, window_samples, Domain, Normalization, SpectroOptions};
use csishift::{Dataset32, Params32};

use crate::config::{self, usage};
use crate::manifest::{write_atomic, RunManifest};
use crate::{Cli, Command, Side};

pub fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Replay { manifest } = &cli.command {
        let m = RunManifest::read(manifest)?;
        if matches!(m.cli.command, Command::Replay { .. }) {
            return Err(usage("a replay manifest cannot be replayed"));
        }
        let mut replayed = m.cli.clone();
        if cli.out.is_some() {
            replayed.out = cli.out.clone();
        }
        replayed.verbose = cli.verbose;
        return run(&replayed, Some(m.config));
    }
    run(cli, None)
}

fn run(cli: &Cli, config: Option<Value>) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut ctx = Ctx { cli, out, preset: config, resolved: Value::Null, inputs: Vec::new(), outputs: Vec::new() };
    let started = Instant::now();
    let name = match &cli.command {
        Command::Simulate => simulate(&mut ctx).map(|_| "simulate"),
        Command::Ingest { input, layout } => ingest(&mut ctx, input, layout.as_deref()).map(|_| "ingest"),
        Command::Process { capture, annotations, frames } => {
            process(&mut ctx, capture, annotations, frames).map(|_| "process")
        }
        Command::Train { dataset, partition, kind } => {
            train_cmd(&mut ctx, dataset, partition.as_deref(), kind.as_deref()).map(|_| "train")
        }
        Command::Eval { model, dataset, partition, kind, side } => {
            eval_cmd(&mut ctx, model, dataset, partition.as_deref(), kind.as_deref(), *side).map(|_| "eval")
        }
        Command::Embed { input, model } => embed_cmd(&mut ctx, input, model.as_deref()).map(|_| "embed"),
        Command::Shift { dataset, partition, kind } => {
            shift_cmd(&mut ctx, dataset, partition, kind.as_deref()).map(|_| "shift")
        }
        Command::Replay { .. } => unreachable!("handled by dispatch"),
    }?;
    let manifest = RunManifest {
        command: name.into(),
        cli: cli.clone(),
        config: ctx.resolved,
        seed: cli.seed,
        inputs: ctx.inputs,
        outputs: ctx.outputs,
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let path = RunManifest::path_in(&ctx.out, name);
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(())
}

struct Ctx<'a> {
    cli: &'a Cli,
    out: PathBuf,
    /// Resolved config from a manifest being replayed.
    preset: Option<Value>,
    resolved: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Ctx<'_> {
    /// Loads the subcommand config, applies `--seed`, and records the result.
    fn config<T>(&mut self, what: &str, seed: impl FnOnce(&mut T, u64)) -> Result<T>
    where
        T: DeserializeOwned + Serialize + Default,
    {
        let mut cfg: T = match self.preset.take() {
            Some(v) => config::from_value(v, what)?,
            None => {
                if let Some(p) = &self.cli.config {
                    self.inputs.push(p.clone());
                }
                config::load(self.cli.config.as_deref(), what)?
            }
        };
        if let Some(s) = self.cli.seed {
            seed(&mut cfg, s);
        }
        self.resolved = serde_json::to_value(&cfg)?;
        Ok(cfg)
    }

    fn input(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            return Err(usage(format!("input {} does not exist", path.display())));
        }
        self.inputs.push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    /// Path for an output file, refusing to clobber any input.
    fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if path.exists() {
            let canon = path.canonicalize()?;
            for input in &self.inputs {
                let sidecar = csishift::dataset::sidecar_path(input);
                for p in [input, &sidecar] {
                    if p.canonicalize().is_ok_and(|c| c == canon) {
                        return Err(usage(format!("refusing to overwrite input {}", p.display())));
                    }
                }
            }
        }
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Registers a tensor output and its JSON sidecar.
    fn tensor_output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.output(name)?;
        let sidecar = csishift::dataset::sidecar_path(Path::new(name));
        self.output(&sidecar.to_string_lossy())?;
        Ok(path)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.output(name)?;
        write_atomic(&path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())?;
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.output(name)?;
        write_atomic(&path, text.as_bytes())?;
        Ok(())
    }
}

fn read_json_input<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{what} {}: {e}", path.display())))?;
    config::from_value(value, what)
}

fn load_dataset(ctx: &mut Ctx, path: &Path) -> Result<Dataset32> {
    let path = ctx.input(path)?;
    ctx.inputs.push(csishift::dataset::sidecar_path(&path));
    LabeledDataset::load(&path).with_context(|| format!("loading dataset {}", path.display()))
}

/// A partition file holds one spec or a list; `kind` picks from a list.
fn load_partition(ctx: &mut Ctx, path: &Path, kind: Option<&str>) -> Result<PartitionSpec> {
    let path = ctx.input(path)?;
    let text = std::fs::read_to_string(&path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("partition {}: {e}", path.display())))?;
    let specs: Vec<PartitionSpec> = if value.is_array() {
        config::from_value(value, "partition")?
    } else {
        vec![config::from_value(value, "partition")?]
    };
    let kinds: Vec<&str> = specs.iter().map(|s| s.kind_name()).collect();
    match kind {
        Some(k) => specs
            .iter()
            .find(|s| s.kind_name() == k)
            .cloned()
            .ok_or_else(|| usage(format!("no `{k}` partition in {}; available: {}", path.display(), kinds.join(", ")))),
        None if specs.len() == 1 => Ok(specs[0].clone()),
        None => Err(usage(format!("{} holds several partitions; pick one with --kind ({})", path.display(), kinds.join(", ")))),
    }
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let spec: BenchmarkSpec = ctx.config("benchmark", |s: &mut BenchmarkSpec, seed| s.seed = seed)?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    spec.templates().map_err(|e| usage(e.to_string()))?;
    let mut samples = Vec::new();
    let mut sessions = Vec::new();
    spec.for_each_session(|rec, session| {
        let stem = format!("sessions/session_{:03}", rec.session_id);
        let bytes = encode_capture(&session.header, &session.frames)?;
        let capture = ctx.output(&format!("{stem}.csi")).map_err(sim_io)?;
        write_atomic(&capture, &bytes).map_err(|e| sim_io(e.into()))?;
        let ann = ctx.output(&format!("{stem}.annotations.jsonl")).map_err(sim_io)?;
        write_annotations(&ann, &session.annotations)?;
        let frames = ctx.output(&format!("{stem}.frames.json")).map_err(sim_io)?;
        write_frame_timestamps(&frames, &session.frame_timestamps)?;
        let s = spec.process_session::<f32>(rec, session)?;
        sessions.push(SessionRecord { n_samples: s.len(), ..rec.clone() });
        samples.extend(s);
        Ok(())
    })?;
    let dataset = LabeledDataset::new(spec.classes.clone(), samples)?;
    let partitions = spec.partitions();
    for p in &partitions {
        split_by(&dataset, p)?;
    }
    let path = ctx.tensor_output("dataset.tns")?;
    dataset.save(&path)?;
    ctx.write_json("partitions.json", &partitions)?;
    let summary = json!({
        "spec": spec,
        "environments": spec.environments()?,
        "persons": spec.people()?,
        "sessions": sessions,
        "n_samples": dataset.len(),
    });
    ctx.write_json("benchmark.json", &summary)?;
    println!("{} sessions, {} windows", sessions.len(), dataset.len());
    Ok(())
}

fn sim_io(e: anyhow::Error) -> csishift::simcsi::SimError {
    csishift::simcsi::SimError::Invalid(format!("{e:#}"))
}

fn ingest(ctx: &mut Ctx, input: &Path, layout: Option<&Path>) -> Result<()> {
    let input = ctx.input(input)?;
    let (header, frames) = match layout {
        Some(l) => {
            let l = ctx.input(l)?;
            let layout: ImportLayout = read_json_input(&l, "layout")?;
            let bytes = std::fs::read(&input)?;
            import_raw(&bytes, &layout).context("importing raw capture")?
        }
        None => read_capture(&input).context("reading capture")?,
    };
    let groups = group_by_antenna(&frames, header.n_ant)?;
    let ordered: Vec<_> = (0..groups[0].len()).flat_map(|t| groups.iter().map(move |g| g[t].clone())).collect();
    let path = ctx.output("capture.csi")?;
    write_atomic(&path, &encode_capture(&header, &ordered)?)?;
    let first = ordered.first().map(|f| f.timestamp_us);
    let last = ordered.last().map(|f| f.timestamp_us);
    ctx.write_json(
        "ingest.json",
        &json!({
            "header": header,
            "packets_per_antenna": groups[0].len(),
            "first_timestamp_us": first,
            "last_timestamp_us": last,
        }),
    )?;
    println!("{} frames, {} antennas", ordered.len(), header.n_ant);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub classes: Vec<String>,
    pub spectro: SpectroOptions,
    pub normalization: Normalization,
    pub window: usize,
    pub stride: usize,
    pub tolerance_us: u64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            classes: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
            spectro: SpectroOptions::default(),
            normalization: Normalization::default(),
            window: 64,
            stride: 32,
            tolerance_us: DEFAULT_TOLERANCE_US,
        }
    }
}

fn process(ctx: &mut Ctx, capture: &Path, annotations: &Path, frames: &Path) -> Result<()> {
    let pc: ProcessConfig = ctx.config("process", |_, _| {})?;
    let capture = ctx.input(capture)?;
    let annotations = ctx.input(annotations)?;
    let frames = ctx.input(frames)?;
    let records: Vec<AnnotationRecord> =
        read_annotations(&annotations).map_err(|e| usage(format!("annotations {}: {e}", annotations.display())))?;
    if records.is_empty() {
        return Err(usage(format!("annotation file {} has no records", annotations.display())));
    }
    let frame_ts =
        read_frame_timestamps(&frames).map_err(|e| usage(format!("frame timestamps {}: {e}", frames.display())))?;
    let (header, all) = read_capture(&capture).context("reading capture")?;
    let groups = group_by_antenna(&all, header.n_ant)?;
    let spec = normalize(&build_spectrogram::<f32>(&groups, &pc.spectro)?, pc.normalization)?;
    let csi_ts: Vec<u64> = groups[0].iter().map(|f| f.timestamp_us).collect();
    let alignment = align(&frame_ts, &csi_ts, pc.tolerance_us)?;
    let mut samples = Vec::new();
    let mut spans = Vec::new();
    let mut dropped = Vec::new();
    for rec in &records {
        let ann = rec.resolve(&pc.classes).map_err(|e| usage(e.to_string()))?;
        let (ranges, lost) = to_packet_ranges(&[ann], &alignment)?;
        let domain = Domain { env_id: rec.env_id, person_id: rec.person_id, session_id: rec.session_id };
        let s = window_samples(&spec, &ranges, domain, pc.window, pc.stride)?;
        for r in &ranges {
            spans.push(json!({
                "label": rec.label,
                "start_frame": rec.start_frame,
                "end_frame": rec.end_frame,
                "start_idx": r.range.start_idx,
                "end_idx": r.range.end_idx,
                "windows": s.len(),
            }));
        }
        dropped.extend(lost.iter().map(|_| json!({"label": rec.label, "start_frame": rec.start_frame, "end_frame": rec.end_frame})));
        samples.extend(s);
    }
    let dataset = LabeledDataset::new(pc.classes.clone(), samples)?;
    let path = ctx.tensor_output("samples.tns")?;
    dataset.save(&path)?;
    ctx.write_json(
        "spans.json",
        &json!({
            "spectrogram": {"rows": spec.rows(), "cols": spec.n_cols, "n_ant": spec.n_ant},
            "spans": spans,
            "dropped": dropped,
            "unmatched_frames": alignment.unmatched().len(),
        }),
    )?;
    println!("{} windows from {} spans", dataset.len(), spans.len());
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    /// Defaults to the benchmark-scale preset sized for the dataset.
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
}

fn model_for(ds: &Dataset32, model: Option<ModelConfig>) -> Result<ModelConfig> {
    let (t, n_ant, f) = ds.window_shape().ok_or_else(|| usage("dataset is empty"))?;
    let cfg = model.unwrap_or_else(|| ModelConfig {
        in_channels: n_ant,
        n_subcarriers: f,
        n_classes: ds.n_classes(),
        ..ModelConfig::bench_preset(t)
    });
    if (cfg.in_channels, cfg.time_len, cfg.n_subcarriers) != (n_ant, t, f) || cfg.n_classes != ds.n_classes() {
        return Err(usage(format!(
            "model expects {}x{}x{} windows and {} classes, dataset has {n_ant}x{t}x{f} and {}",
            cfg.in_channels,
            cfg.time_len,
            cfg.n_subcarriers,
            cfg.n_classes,
            ds.n_classes()
        )));
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn train_cmd(ctx: &mut Ctx, dataset: &Path, partition: Option<&Path>, kind: Option<&str>) -> Result<()> {
    let mut tc: TrainCommandConfig = ctx.config("train", |c: &mut TrainCommandConfig, s| c.train.seed = s)?;
    let ds = load_dataset(ctx, dataset)?;
    let idx: Vec<usize> = match partition {
        Some(p) => split_by(&ds, &load_partition(ctx, p, kind)?)?.train,
        None => (0..ds.len()).collect(),
    };
    let cfg = model_for(&ds, tc.model.take())?;
    tc.model = Some(cfg.clone());
    ctx.resolved = serde_json::to_value(&tc)?;
    let samples: Vec<_> = idx.iter().map(|&i| &ds.samples[i]).collect();
    let (params, history) = train(&cfg, &samples, &tc.train)?;
    let ckpt = Checkpoint {
        classes: ds.classes.clone(),
        seed: tc.train.seed,
        epochs: tc.train.epochs,
        history: serde_json::to_value(&history)?,
        ..params.manifest()
    };
    let path = ctx.tensor_output("model.tns")?;
    params.save(&path, &ckpt)?;
    let last = history.epochs.last();
    println!(
        "trained {} params on {} windows; final loss {:.4}",
        params.n_trainable(),
        samples.len(),
        last.map_or(f64::NAN, |e| e.class_loss)
    );
    Ok(())
}

fn load_model(ctx: &mut Ctx, path: &Path) -> Result<(Params32, Checkpoint)> {
    let path = ctx.input(path)?;
    ctx.inputs.push(csishift::dataset::sidecar_path(&path));
    Params32::load(&path).with_context(|| format!("loading model {}", path.display()))
}

fn eval_cmd(
    ctx: &mut Ctx,
    model: &Path,
    dataset: &Path,
    partition: Option<&Path>,
    kind: Option<&str>,
    side: Side,
) -> Result<()> {
    let (params, ckpt) = load_model(ctx, model)?;
    let ds = load_dataset(ctx, dataset)?;
    if !ckpt.classes.is_empty() && ckpt.classes != ds.classes {
        return Err(usage("model and dataset class lists differ"));
    }
    model_for(&ds, Some(params.config.clone()))?;
    let (idx, part) = match partition {
        Some(p) => {
            let spec = load_partition(ctx, p, kind)?;
            let split = split_by(&ds, &spec)?;
            (if side == Side::Train { split.train } else { split.test }, Some(spec))
        }
        None => ((0..ds.len()).collect(), None),
    };
    let samples: Vec<_> = idx.iter().map(|&i| &ds.samples[i]).collect();
    let result = evaluate(&params, &samples)?;
    ctx.write_text("confusion.csv", &confusion_csv(&ds.classes, &result.confusion))?;
    ctx.write_json(
        "eval.json",
        &json!({
            "partition": part,
            "side": if part.is_some() { Some(side) } else { None },
            "n": result.n,
            "accuracy": result.accuracy,
            "confusion": result.confusion,
            "mean_softmax": result.mean_softmax,
        }),
    )?;
    println!("accuracy: {:.3}", result.accuracy);
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedCommandConfig {
    pub tsne: EmbedConfig,
    /// When set, a seeded subset of at most this many rows is embedded.
    pub max_points: Option<usize>,
}

fn embed_cmd(ctx: &mut Ctx, input: &Path, model: Option<&Path>) -> Result<()> {
    let ec: EmbedCommandConfig = ctx.config("embed", |c: &mut EmbedCommandConfig, s| c.tsne.seed = s)?;
    let input_path = ctx.input(input)?;
    let sidecar = csishift::dataset::sidecar_path(&input_path);
    let dataset = if sidecar.exists() { LabeledDataset::<f32>::load(&input_path).ok() } else { None };
    let (x, n, d, labels, names, source) = match (model, &dataset) {
        (Some(m), Some(ds)) => {
            let (params, _) = load_model(ctx, m)?;
            model_for(ds, Some(params.config.clone()))?;
            let refs: Vec<_> = ds.samples.iter().collect();
            let z = features(&params, &refs)?;
            let d = params.config.feature_len();
            (z.iter().map(|&v| f64::from(v)).collect::<Vec<_>>(), ds.len(), d, ds.labels(), ds.classes.clone(), "model_features")
        }
        (Some(_), None) => return Err(usage("--model needs a dataset input with its JSON sidecar")),
        (None, Some(ds)) => {
            let x: Vec<f64> = ds.samples.iter().flat_map(|s| s.window.data.iter().map(|&v| f64::from(v))).collect();
            let d = x.len() / ds.len().max(1);
            (x, ds.len(), d, ds.labels(), ds.classes.clone(), "dataset_windows")
        }
        (None, None) => {
            let t = csishift::tensor_io::Tensor::read(&input_path).context("reading tensor")?;
            let n = t.dims.first().copied().unwrap_or(0) as usize;
            let d = t.dims.iter().skip(1).product::<u64>() as usize;
            (t.to_scalars::<f64>(), n, d, vec![0; n], vec!["points".to_string()], "tensor_rows")
        }
    };
    let (x, labels, n) = match ec.max_points {
        Some(m) if m < n => {
            use rand::seq::index::sample;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(ec.tsne.seed);
            let mut pick = sample(&mut rng, n, m).into_vec();
            pick.sort_unstable();
            let x: Vec<f64> = pick.iter().flat_map(|&i| x[i * d..(i + 1) * d].iter().copied()).collect();
            (x, pick.iter().map(|&i| labels[i]).collect(), m)
        }
        _ => (x, labels, n),
    };
    let cfg = ec.tsne.clone().clamped_for(n);
    let emb = tsne(&x, n, d, &cfg)?;
    let path = ctx.output("embedding.tns")?;
    csishift::tensor_io::Tensor::new(vec![n as u64, 2], &emb.points)?.write(&path)?;
    let style = ScatterStyle { title: Some(format!("t-SNE of {source}")), ..ScatterStyle::default() };
    ctx.write_text("embedding.svg", &scatter_svg(&emb.points, &labels, &names, &style))?;
    ctx.write_json(
        "embedding.json",
        &json!({
            "source": source,
            "input": input_path,
            "n_points": n,
            "dim": d,
            "perplexity": cfg.perplexity,
            "final_kl": emb.final_kl,
            "labels": labels,
            "names": names,
        }),
    )?;
    println!("embedded {n} points of dimension {d} ({source}); KL {:.4}", emb.final_kl);
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftCommandConfig {
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
    pub shift: ShiftOptions,
}

fn shift_cmd(ctx: &mut Ctx, dataset: &Path, partition: &Path, kind: Option<&str>) -> Result<()> {
    let mut sc: ShiftCommandConfig = ctx.config("shift", |c: &mut ShiftCommandConfig, s| c.train.seed = s)?;
    let ds = load_dataset(ctx, dataset)?;
    let part = load_partition(ctx, partition, kind)?;
    let cfg = model_for(&ds, sc.model.take())?;
    sc.model = Some(cfg.clone());
    ctx.resolved = serde_json::to_value(&sc)?;
    let report = run_shift_experiment(&ds, &part, &cfg, &sc.train, &sc.shift)?;
    ctx.write_json("shift_report.json", &report)?;
    for r in &report.strategies {
        let name = serde_json::to_value(r.strategy)?;
        let name = name.as_str().unwrap_or("strategy");
        ctx.write_text(&format!("confusion_{name}_seen.csv"), &confusion_csv(&ds.classes, &r.seen.confusion))?;
        ctx.write_text(&format!("confusion_{name}_unseen.csv"), &confusion_csv(&ds.classes, &r.unseen.confusion))?;
        println!(
            "{name}: seen {:.3} unseen {:.3} drop {:.1} pts, output JS {:.4}",
            r.seen_accuracy, r.unseen_accuracy, r.accuracy_drop, r.output_divergence
        );
    }
    let group_word = match part {
        PartitionSpec::ByEnvironment { .. } => "env",
        PartitionSpec::ByPerson { .. } => "person",
        PartitionSpec::ByTime { .. } => "",
    };
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    for &g in &report.embedding.groups {
        let next = ids.len();
        ids.entry(g).or_insert(next);
    }
    let names: Vec<String> = ids
        .keys()
        .map(|g| match part {
            PartitionSpec::ByTime { .. } => ["early", "late"][(*g).min(1)].to_string(),
            _ => format!("{group_word} {g}"),
        })
        .collect();
    let labels: Vec<usize> = report.embedding.groups.iter().map(|g| ids[g]).collect();
    let style = ScatterStyle { title: Some(format!("{} features", part.kind_name())), ..ScatterStyle::default() };
    ctx.write_text("embedding.svg", &scatter_svg(&report.embedding.points, &labels, &names, &style))?;
    println!("embedding separability {:.3}", report.embedding_separability);
    Ok(())
}
