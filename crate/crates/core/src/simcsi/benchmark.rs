use serde::{Deserialize, Serialize};

use super::profiles::{default_templates, ActivityTemplate, EnvProfile, PersonProfile, DEFAULT_CLASSES};
use super::session::{generate_session, Session, SessionSpec};
use super::{Result, SimError};
use crate::annotate::{align, to_packet_ranges, Annotation, DEFAULT_TOLERANCE_US};
use crate::dataset::{split_by, LabeledDataset, PartitionSpec};
use crate::ingest::{decode_capture, encode_capture, group_by_antenna};
use crate::spectro::{build_spectrogram, normalize, window_samples, ActivitySample, Domain, Normalization, SpectroOptions};
use crate::Scalar;

fn default_classes() -> Vec<String> {
    DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// Grid and signal knobs for a synthetic shift benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub n_envs: usize,
    pub n_persons: usize,
    pub sessions_per_pair: usize,
    pub seed: u64,
    pub rate_pps: u32,
    pub n_ant: u8,
    pub classes: Vec<String>,
    /// Times each session plays the full class list.
    pub repetitions: usize,
    pub activity_duration_s: f64,
    pub window: usize,
    pub stride: usize,
    pub noise_std: f64,
    pub multipath_taps: usize,
    pub echo_energy: f64,
    pub person_spread: f64,
    /// Amplitude of each environment's ambient clutter component; 0 disables it.
    pub clutter_amp: f64,
    pub normalization: Normalization,
    /// Defaults to the last environment.
    pub held_out_envs: Option<Vec<u32>>,
    pub person_env: u32,
    /// Defaults to the last person.
    pub held_out_persons: Option<Vec<u32>>,
    pub time_train_fraction: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            n_envs: 3,
            n_persons: 2,
            sessions_per_pair: 1,
            seed: 0,
            rate_pps: 200,
            n_ant: 1,
            classes: default_classes(),
            repetitions: 2,
            activity_duration_s: 3.0,
            window: 64,
            stride: 32,
            noise_std: 0.02,
            multipath_taps: 6,
            echo_energy: 0.8,
            person_spread: 0.1,
            clutter_amp: 0.15,
            normalization: Normalization::MaxAbs,
            held_out_envs: None,
            person_env: 0,
            held_out_persons: None,
            time_train_fraction: 0.5,
        }
    }
}

/// Where one session came from and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub env_id: u32,
    pub person_id: u32,
    pub session_id: u32,
    pub seed: u64,
    pub n_packets: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct Benchmark<S> {
    pub spec: BenchmarkSpec,
    pub envs: Vec<EnvProfile>,
    pub persons: Vec<PersonProfile>,
    pub sessions: Vec<SessionRecord>,
    pub dataset: LabeledDataset<S>,
    /// by_environment, by_person, by_time, in that order.
    pub partitions: Vec<PartitionSpec>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_envs < 2 || self.n_persons < 2 {
            return Err(SimError::GridTooSmall { envs: self.n_envs, persons: self.n_persons });
        }
        if self.sessions_per_pair == 0 || self.repetitions == 0 || self.classes.is_empty() {
            return Err(SimError::EmptyScript);
        }
        if self.window == 0 || self.stride == 0 {
            return Err(SimError::Invalid("window and stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn templates(&self) -> Result<Vec<ActivityTemplate>> {
        let all = default_templates();
        self.classes
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let t = all.iter().find(|t| &t.name == name).ok_or_else(|| SimError::UnknownClass(name.clone()))?;
                Ok(ActivityTemplate { class_id: i, ..t.clone() })
            })
            .collect()
    }

    pub fn environments(&self) -> Result<Vec<EnvProfile>> {
        (0..self.n_envs as u32)
            .map(|e| {
                let env = EnvProfile::multipath(e, self.multipath_taps, self.echo_energy, self.noise_std, mix(self.seed ^ 0xe1))?;
                Ok(env.with_random_clutter(self.clutter_amp, mix(self.seed ^ 0xc7)))
            })
            .collect()
    }

    pub fn people(&self) -> Result<Vec<PersonProfile>> {
        (0..self.n_persons as u32).map(|p| PersonProfile::random(p, self.person_spread, mix(self.seed ^ 0x9e))).collect()
    }

    pub fn script(&self) -> Vec<(String, f64)> {
        (0..self.repetitions)
            .flat_map(|_| self.classes.iter().map(|c| (c.clone(), self.activity_duration_s)))
            .collect()
    }

    pub fn partitions(&self) -> Vec<PartitionSpec> {
        vec![
            PartitionSpec::ByEnvironment {
                held_out: self.held_out_envs.clone().unwrap_or_else(|| vec![self.n_envs as u32 - 1]),
            },
            PartitionSpec::ByPerson {
                env_id: Some(self.person_env),
                held_out: self.held_out_persons.clone().unwrap_or_else(|| vec![self.n_persons as u32 - 1]),
            },
            PartitionSpec::ByTime { train_fraction: self.time_train_fraction },
        ]
    }

    /// Generates every session of the grid in (env, person, session) order.
    pub fn for_each_session(&self, mut f: impl FnMut(&SessionRecord, &Session) -> Result<()>) -> Result<()> {
        self.validate()?;
        let templates = self.templates()?;
        let envs = self.environments()?;
        let persons = self.people()?;
        let mut session_id = 0u32;
        for env in &envs {
            for person in &persons {
                for _ in 0..self.sessions_per_pair {
                    let seed = mix(self.seed ^ mix(u64::from(session_id) + 1));
                    let spec = SessionSpec {
                        env,
                        person,
                        session_id,
                        script: self.script(),
                        rate_pps: self.rate_pps,
                        n_ant: self.n_ant,
                        seed,
                        t0_us: 0,
                    };
                    let session = generate_session(&spec, &templates)?;
                    let rec = SessionRecord {
                        env_id: env.env_id,
                        person_id: person.person_id,
                        session_id,
                        seed,
                        n_packets: session.frames.len() / usize::from(self.n_ant),
                        n_samples: 0,
                    };
                    f(&rec, &session)?;
                    session_id += 1;
                }
            }
        }
        Ok(())
    }

    /// Runs a session through encode, parse, spectrogram, alignment and windowing.
    pub fn process_session<S: Scalar>(&self, rec: &SessionRecord, session: &Session) -> Result<Vec<ActivitySample<S>>> {
        let bytes = encode_capture(&session.header, &session.frames)?;
        let (header, frames) = decode_capture(&bytes)?;
        let groups = group_by_antenna(&frames, header.n_ant)?;
        let spec = build_spectrogram::<S>(&groups, &SpectroOptions::default())?;
        let spec = normalize(&spec, self.normalization)?;
        let csi_ts: Vec<u64> = groups[0].iter().map(|f| f.timestamp_us).collect();
        let alignment = align(&session.frame_timestamps, &csi_ts, DEFAULT_TOLERANCE_US)?;
        let annotations: Vec<Annotation> =
            session.annotations.iter().map(|a| a.resolve(&self.classes)).collect::<std::result::Result<_, _>>()?;
        let (ranges, _) = to_packet_ranges(&annotations, &alignment)?;
        let domain = Domain { env_id: rec.env_id, person_id: rec.person_id, session_id: rec.session_id };
        Ok(window_samples(&spec, &ranges, domain, self.window, self.stride)?)
    }
}

/// Builds the full grid and checks that all three partitions are usable.
pub fn make_benchmark<S: Scalar>(spec: &BenchmarkSpec) -> Result<Benchmark<S>> {
    let mut samples = Vec::new();
    let mut sessions = Vec::new();
    spec.for_each_session(|rec, session| {
        let s = spec.process_session::<S>(rec, session)?;
        sessions.push(SessionRecord { n_samples: s.len(), ..rec.clone() });
        samples.extend(s);
        Ok(())
    })?;
    let dataset = LabeledDataset::new(spec.classes.clone(), samples)?;
    let partitions = spec.partitions();
    for p in &partitions {
        split_by(&dataset, p)?;
    }
    Ok(Benchmark { spec: spec.clone(), envs: spec.environments()?, persons: spec.people()?, sessions, dataset, partitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchmarkSpec {
        BenchmarkSpec { classes: vec!["empty".into(), "walking".into()], activity_duration_s: 1.0, ..Default::default() }
    }

    #[test]
    fn grid_too_small() {
        let spec = BenchmarkSpec { n_persons: 1, ..small() };
        assert!(matches!(make_benchmark::<f32>(&spec), Err(SimError::GridTooSmall { .. })));
    }

    #[test]
    fn partitions_are_sound() {
        let b = make_benchmark::<f32>(&small()).unwrap();
        assert_eq!(b.sessions.len(), 6);
        // 1 s spans lose their last 0.1 s to frame alignment: 181 packets -> 4 windows.
        assert!(b.sessions.iter().all(|s| s.n_samples == 2 * 2 * 4));
        let env = split_by(&b.dataset, &b.partitions[0]).unwrap();
        assert!(env.train.iter().all(|&i| b.dataset.samples[i].domain.env_id != 2));
        assert!(env.test.iter().all(|&i| b.dataset.samples[i].domain.env_id == 2));
        let person = split_by(&b.dataset, &b.partitions[1]).unwrap();
        assert!(person.train.iter().chain(&person.test).all(|&i| b.dataset.samples[i].domain.env_id == 0));
        let time = split_by(&b.dataset, &b.partitions[2]).unwrap();
        assert_eq!(time.train.len(), time.test.len());
    }

    #[test]
    fn spec_json_round_trip_and_unknown_keys() {
        let spec = small();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<BenchmarkSpec>(&text).unwrap(), spec);
        let err = serde_json::from_str::<BenchmarkSpec>(r#"{"n_envz": 3}"#).unwrap_err();
        assert!(err.to_string().contains("n_envz"));
    }
}
