use csishift::dataset::split_by;
use csishift::embed::EmbedConfig;
use csishift::model::{ModelConfig, TrainConfig};
use csishift::shift::{run_shift_experiment, ShiftOptions, Strategy};
use csishift::simcsi::{make_benchmark, BenchmarkSpec};

fn js_oracle(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

#[test]
fn report_fields_match_recomputation() {
    let spec = BenchmarkSpec { classes: vec!["empty".into(), "walking".into()], activity_duration_s: 1.0, ..Default::default() };
    let b = make_benchmark::<f32>(&spec).unwrap();
    let cfg = ModelConfig { n_classes: 2, ..ModelConfig::bench_preset(spec.window) };
    let tc = TrainConfig { epochs: 2, seed: 3, ..Default::default() };
    let opts = ShiftOptions {
        k_shot: 2,
        adapt: TrainConfig { epochs: 1, val_fraction: 0.0, ..Default::default() },
        embed: EmbedConfig { n_iter: 100, ..Default::default() },
        embed_points: 40,
        ..Default::default()
    };
    let report = run_shift_experiment(&b.dataset, &b.partitions[0], &cfg, &tc, &opts).unwrap();
    let split = split_by(&b.dataset, &b.partitions[0]).unwrap();
    assert_eq!(report.n_unseen_test + report.n_support, split.test.len());
    assert_eq!(report.n_support, 2 * 2);
    assert_eq!(report.n_fit + report.n_seen_test, split.train.len());

    let names: Vec<Strategy> = report.strategies.iter().map(|s| s.strategy).collect();
    assert_eq!(names, [Strategy::Vanilla, Strategy::Grl, Strategy::KShot]);
    for r in &report.strategies {
        for (eval, acc) in [(&r.seen, r.seen_accuracy), (&r.unseen, r.unseen_accuracy)] {
            let total: u64 = eval.confusion.iter().flatten().sum();
            let diag: u64 = (0..2).map(|i| eval.confusion[i][i]).sum();
            assert_eq!(total as usize, eval.n);
            assert!((acc - diag as f64 / total as f64).abs() < 1e-12);
        }
        assert_eq!(r.unseen.n, report.n_unseen_test);
        assert!((r.accuracy_drop - 100.0 * (r.seen_accuracy - r.unseen_accuracy)).abs() < 1e-9);
        let rows: Vec<f64> = (0..2)
            .filter(|&c| r.p_train[c].iter().sum::<f64>() > 0.0 && r.p_test[c].iter().sum::<f64>() > 0.0)
            .map(|c| js_oracle(&r.p_train[c], &r.p_test[c]))
            .collect();
        let js = rows.iter().sum::<f64>() / rows.len() as f64;
        assert!((r.output_divergence - js).abs() < 1e-9, "{} vs {js}", r.output_divergence);
        assert!(r.output_divergence <= std::f64::consts::LN_2 + 1e-12);
    }
    assert!((-1.0..=1.0).contains(&report.embedding_separability));
    assert_eq!(report.embedding.points.len(), 2 * report.embedding.groups.len());
    assert!(report.embedding.groups.iter().all(|&g| g <= 2));

    let again = run_shift_experiment(&b.dataset, &b.partitions[0], &cfg, &tc, &opts).unwrap();
    assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
}
