use csishift::dataset::{split_by, PartitionSpec};
use csishift::simcsi::{generate_session, make_benchmark, BenchmarkSpec, EnvProfile, PersonProfile, SessionSpec};
use csishift::simcsi::default_templates;
use csishift::ingest::{decode_capture, encode_capture, group_by_antenna};
use csishift::spectro::{build_spectrogram, SpectroOptions};
use num_complex::Complex;

fn noiseless() -> BenchmarkSpec {
    BenchmarkSpec { n_envs: 2, noise_std: 0.0, clutter_amp: 0.0, person_spread: 0.0, ..Default::default() }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn nearest_centroid_separates_classes_in_one_environment() {
    let b = make_benchmark::<f64>(&noiseless()).unwrap();
    let k = b.dataset.n_classes();
    let env0 = |s: &&csishift::spectro::ActivitySample<f64>| s.domain.env_id == 0;
    let train: Vec<_> = b.dataset.samples.iter().filter(env0).filter(|s| s.domain.person_id == 0).collect();
    let test: Vec<_> = b.dataset.samples.iter().filter(env0).filter(|s| s.domain.person_id == 1).collect();
    assert!(!train.is_empty() && !test.is_empty());
    let dim = train[0].window.n_cols;
    let mut centroids = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for s in &train {
        for (c, v) in centroids[s.label].iter_mut().zip(s.window.mean_row()) {
            *c += v;
        }
        counts[s.label] += 1;
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        assert!(*n > 0);
        c.iter_mut().for_each(|v| *v /= *n as f64);
    }
    let correct = test
        .iter()
        .filter(|s| {
            let m = s.window.mean_row();
            let best = (0..k).min_by(|&a, &b| l2(&m, &centroids[a]).total_cmp(&l2(&m, &centroids[b]))).unwrap();
            best == s.label
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc > 0.9, "nearest-centroid accuracy {acc}");
}

#[test]
fn static_gain_changes_spectrogram_means() {
    let templates = default_templates();
    let person = PersonProfile::new(0, 1.0, 1.0).unwrap();
    let flat = EnvProfile::new(0, vec![Complex::new(1.0, 0.0); 256], 0.0).unwrap();
    let echo = EnvProfile::multipath(1, 6, 0.8, 0.0, 3).unwrap();
    let mean_of = |env: &EnvProfile| {
        let spec = SessionSpec {
            env,
            person: &person,
            session_id: 0,
            script: vec![("walking".into(), 2.0)],
            rate_pps: 200,
            n_ant: 1,
            seed: 9,
            t0_us: 0,
        };
        let s = generate_session(&spec, &templates).unwrap();
        let (h, frames) = decode_capture(&encode_capture(&s.header, &s.frames).unwrap()).unwrap();
        let groups = group_by_antenna(&frames, h.n_ant).unwrap();
        build_spectrogram::<f64>(&groups, &SpectroOptions::default()).unwrap().mean_row()
    };
    let (a, b) = (mean_of(&flat), mean_of(&echo));
    assert!(l2(&a, &b) > 1e-3 * a.iter().map(|v| v * v).sum::<f64>().sqrt());
}

#[test]
fn benchmark_partitions_are_sound_and_reproducible() {
    let spec = BenchmarkSpec { classes: vec!["empty".into(), "walking".into(), "clapping".into()], ..Default::default() };
    let a = make_benchmark::<f32>(&spec).unwrap();
    let b = make_benchmark::<f32>(&spec).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.sessions.len(), 6);
    assert_eq!(a.dataset.window_shape(), Some((64, 1, 242)));

    let env = split_by(&a.dataset, &a.partitions[0]).unwrap();
    let envs = |idx: &[usize]| idx.iter().map(|&i| a.dataset.samples[i].domain.env_id).collect::<std::collections::BTreeSet<_>>();
    assert!(envs(&env.train).is_disjoint(&envs(&env.test)));

    let person = split_by(&a.dataset, &a.partitions[1]).unwrap();
    let persons = |idx: &[usize]| idx.iter().map(|&i| a.dataset.samples[i].domain.person_id).collect::<std::collections::BTreeSet<_>>();
    assert!(persons(&person.train).is_disjoint(&persons(&person.test)));
    assert_eq!(envs(&person.train), envs(&person.test));

    let PartitionSpec::ByTime { train_fraction } = a.partitions[2] else { panic!("third partition is by-time") };
    assert_eq!(train_fraction, 0.5);
    let time = split_by(&a.dataset, &a.partitions[2]).unwrap();
    for sid in 0..6u32 {
        let tr: Vec<_> = time.train.iter().map(|&i| &a.dataset.samples[i]).filter(|s| s.domain.session_id == sid).collect();
        let te: Vec<_> = time.test.iter().map(|&i| &a.dataset.samples[i]).filter(|s| s.domain.session_id == sid).collect();
        assert_eq!(tr.len(), te.len());
        let last_train = tr.iter().map(|s| s.start_packet).max().unwrap();
        assert!(te.iter().all(|s| s.start_packet > last_train));
    }
}
