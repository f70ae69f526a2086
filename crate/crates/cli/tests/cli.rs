use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use csishift::dataset::LabeledDataset;
use csishift::spectro::{ActivitySample, Domain, Spectrogram};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csishift")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate_small(dir: &Path) {
    std::fs::write(dir.join("sim.json"), r#"{"classes":["empty","walking"],"activity_duration_s":1.0}"#).unwrap();
    let o = run(dir, &["--out", "sim", "--config", "sim.json", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_lists_global_flags_and_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["--seed", "--out", "--config", "simulate", "ingest", "process", "train", "eval", "embed", "shift"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
    let o = run(dir.path(), &["bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.json"), r#"{"n_envs": 3, "noise_stdd": 0.1}"#).unwrap();
    let o = run(dir.path(), &["--config", "a.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("noise_stdd"), "{}", stderr(&o));

    std::fs::write(dir.path().join("c.json"), r#"{"window": "wide"}"#).unwrap();
    let o = run(dir.path(), &["--config", "c.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`window`"), "{}", stderr(&o));

    std::fs::write(dir.path().join("d.json"), r#"{"train": {"epochs": 2,}}"#).unwrap();
    let o = run(dir.path(), &["--config", "d.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(dir.path().join("e.json"), r#"{"n_envs": 1}"#).unwrap();
    let o = run(dir.path(), &["--config", "e.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("simulate.manifest.json").exists());
}

#[test]
fn simulate_is_deterministic_and_process_matches_its_windows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_small(d);
    let o = run(d, &["--out", "again", "--config", "sim.json", "simulate"]);
    assert!(o.status.success());
    for f in ["dataset.tns", "dataset.json", "partitions.json", "benchmark.json", "sessions/session_003.csi"] {
        assert_eq!(std::fs::read(d.join("sim").join(f)).unwrap(), std::fs::read(d.join("again").join(f)).unwrap(), "{f}");
    }
    assert!(d.join("sim/simulate.manifest.json").exists());

    std::fs::write(d.join("p.json"), r#"{"classes":["empty","walking"]}"#).unwrap();
    let s = "sim/sessions/session_000";
    let args = |ann: &str| {
        vec![
            "--out".to_string(),
            "proc".into(),
            "--config".into(),
            "p.json".into(),
            "process".into(),
            "--capture".into(),
            format!("{s}.csi"),
            "--annotations".into(),
            ann.to_string(),
            "--frames".into(),
            format!("{s}.frames.json"),
        ]
    };
    let ann = format!("{s}.annotations.jsonl");
    let a = args(&ann);
    let o = run(d, &a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let processed = LabeledDataset::<f32>::load(d.join("proc/samples.tns")).unwrap();
    let sim = LabeledDataset::<f32>::load(d.join("sim/dataset.tns")).unwrap();
    let first: Vec<_> = sim.samples.iter().filter(|x| x.domain.session_id == 0).collect();
    assert_eq!(processed.len(), first.len());
    assert_eq!(processed.window_shape(), Some((64, 1, 242)));
    for (p, q) in processed.samples.iter().zip(first) {
        assert_eq!(p.window.data, q.window.data);
        assert_eq!(p.label, q.label);
    }

    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    let a = args("empty.jsonl");
    let o = run(d, &a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_eval_and_shift_emit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_small(d);
    std::fs::write(d.join("t.json"), r#"{"train":{"epochs":3}}"#).unwrap();
    let part = ["--partition", "sim/partitions.json", "--kind", "by_environment"];
    let mut args = vec!["--out", "m", "--config", "t.json", "train", "--dataset", "sim/dataset.tns"];
    args.extend(part);
    let o = run(d, &args);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut args = vec!["--out", "e", "eval", "--model", "m/model.tns", "--dataset", "sim/dataset.tns"];
    args.extend(part);
    let o = run(d, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = String::from_utf8_lossy(&o.stdout).lines().find(|l| l.starts_with("accuracy: ")).unwrap().to_string();
    let value = line.trim_start_matches("accuracy: ");
    assert_eq!(value.split('.').nth(1).map(str::len), Some(3), "{line}");
    let csv = std::fs::read_to_string(d.join("e/confusion.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], ["true\\predicted", "empty", "walking"]);
    let total: u64 = rows[1..].iter().flat_map(|r| r[1..].iter().map(|v| v.parse::<u64>().unwrap())).sum();
    let diag: u64 = rows[1][1].parse::<u64>().unwrap() + rows[2][2].parse::<u64>().unwrap();
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("e/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["n"].as_u64(), Some(total));
    assert!((eval["accuracy"].as_f64().unwrap() - diag as f64 / total as f64).abs() < 1e-12);
    assert_eq!(format!("{:.3}", eval["accuracy"].as_f64().unwrap()), value);

    std::fs::write(
        d.join("s.json"),
        r#"{"train":{"epochs":1},"shift":{"k_shot":2,"adapt":{"epochs":1},"embed":{"n_iter":100},"embed_points":40}}"#,
    )
    .unwrap();
    let o = run(d, &["--out", "sh", "--config", "s.json", "shift", "--dataset", "sim/dataset.tns", "--partition", "sim/partitions.json", "--kind", "by_environment"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("sh/shift_report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["strategies"].as_array().unwrap().iter().map(|s| s["strategy"].as_str().unwrap()).collect();
    assert_eq!(names, ["vanilla", "grl", "k_shot"]);
    for n in &names {
        assert!(d.join(format!("sh/confusion_{n}_unseen.csv")).exists());
    }
    assert!(d.join("sh/embedding.svg").exists());

    let o = run(d, &["--out", "sh", "shift", "--dataset", "sim/dataset.tns", "--partition", "sim/partitions.json"]);
    assert_eq!(o.status.code(), Some(2), "several partitions without --kind must be rejected");
}

#[test]
fn embed_svg_has_a_marker_per_point_and_a_legend_per_label() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut samples = Vec::new();
    for i in 0..60 {
        let c = i % 3;
        let data: Vec<f32> =
            (0..8).map(|k| if k == c { 6.0 } else { 0.0 } + <StandardNormal as Distribution<f32>>::sample(&StandardNormal, &mut rng)).collect();
        samples.push(ActivitySample {
            window: Spectrogram { data, n_packets: 2, n_ant: 1, n_cols: 4, t0_us: 0, dt_us: 5000.0 },
            label: c,
            domain: Domain::default(),
            start_packet: 0,
        });
    }
    let ds = LabeledDataset::new(vec!["a".into(), "b".into(), "c".into()], samples).unwrap();
    ds.save(dir.path().join("blobs.tns")).unwrap();
    let o = run(dir.path(), &["--out", "emb", "embed", "--input", "blobs.tns"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("emb/embedding.svg")).unwrap();
    assert_eq!(svg.matches("class=\"point\"").count(), 60);
    assert_eq!(svg.matches("class=\"legend-entry\"").count(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("emb/embedding.json")).unwrap()).unwrap();
    assert_eq!(meta["source"], "dataset_windows");
    let t = csishift::tensor_io::Tensor::read(dir.path().join("emb/embedding.tns")).unwrap();
    assert_eq!(t.dims, vec![60, 2]);
}

#[test]
fn inputs_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_small(d);
    std::fs::create_dir(d.join("work")).unwrap();
    std::fs::copy(d.join("sim/sessions/session_000.csi"), d.join("work/capture.csi")).unwrap();
    let before = std::fs::read(d.join("work/capture.csi")).unwrap();
    let o = run(d, &["--out", "work", "ingest", "--input", "work/capture.csi"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("overwrite"));
    assert_eq!(std::fs::read(d.join("work/capture.csi")).unwrap(), before);

    let o = run(d, &["--out", "ing", "ingest", "--input", "missing.csi"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(d.join("junk.csi"), b"not a capture").unwrap();
    let o = run(d, &["--out", "ing", "ingest", "--input", "junk.csi"]);
    assert_eq!(o.status.code(), Some(1));
}
