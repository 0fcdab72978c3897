//! Per-engine, per-tier behaviour parameters.
//!
//! Profiles are stored as TOML with one table per `(engine, tier)` block,
//! e.g. `[od.H]`, `[asr.L]`, plus a `[fusion]` table. `profiles/paper.params`
//! holds the values anchored on the published per-stage measurements;
//! `profiles/fitted.params` is produced by the calibrator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{detection_probability, SceneObject};
use crate::types::{Combo, Engine, Resources, Tier};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("malformed profile document: {0}")]
    Malformed(String),
    #[error("invalid profile value {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read profile {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierPair<T> {
    #[serde(rename = "H")]
    pub h: T,
    #[serde(rename = "L")]
    pub l: T,
}

impl<T> TierPair<T> {
    pub fn get(&self, tier: Tier) -> &T {
        match tier {
            Tier::H => &self.h,
            Tier::L => &self.l,
        }
    }

    pub fn get_mut(&mut self, tier: Tier) -> &mut T {
        match tier {
            Tier::H => &mut self.h,
            Tier::L => &mut self.l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorProfile {
    pub model: String,
    pub fps: f64,
    /// Mean average precision on the held-out set; base detection rate.
    pub map: f64,
    pub small_object_factor: f64,
    /// Exponential decay rate of the detection rate beyond 1 m.
    pub distance_decay_per_m: f64,
    /// Chance per pass that another object is reported as the wanted class.
    pub spurious_detection_prob: f64,
    /// Half-width of the uniform jitter on one multi-frame pass.
    pub latency_jitter_ms: f64,
    /// Half-width of the uniform noise on detection coordinates.
    pub position_noise: f64,
    pub resources: Resources,
}

impl DetectorProfile {
    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.fps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrProfile {
    pub model: String,
    pub transcription_ms: f64,
    /// Extra network round trip on top of `transcription_ms` (cloud engines).
    pub network_rtt_ms: f64,
    /// Probability that a single keyword survives transcription.
    pub keyword_recall: f64,
    /// Reported word error rate. Informational only.
    pub wer: f64,
    pub latency_jitter_ms: f64,
    pub resources: Resources,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierProfile {
    pub model: String,
    pub latency_ms: f64,
    /// Probability of emitting the correct operation label.
    pub label_accuracy: f64,
    /// Reported F1 score. Informational only.
    pub f1: f64,
    pub latency_jitter_ms: f64,
    pub resources: Resources,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureProfile {
    pub model: String,
    pub classifier_ms: f64,
    /// Probability of the correct label; errors are uniform over the rest.
    pub recall: f64,
    pub window_samples: u32,
    pub sample_rate_hz: f64,
    pub latency_jitter_ms: f64,
    pub resources: Resources,
}

impl GestureProfile {
    /// Time to fill the feature window.
    pub fn window_fill_ms(&self) -> f64 {
        self.window_samples as f64 / self.sample_rate_hz * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionProfile {
    /// Constant added to every speech-driven outcome. May be negative: the
    /// measured end-to-end latencies are shorter than transcription alone,
    /// so part of transcription overlaps capture.
    pub overhead_ms: f64,
    /// Bound on the per-frame step of the tracker's random walk.
    pub track_step: f64,
    /// Resource use shared by every combination.
    pub base_resources: Resources,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineProfiles {
    pub od: TierPair<DetectorProfile>,
    pub asr: TierPair<AsrProfile>,
    pub tc: TierPair<ClassifierProfile>,
    pub gr: TierPair<GestureProfile>,
    pub fusion: FusionProfile,
}

impl EngineProfiles {
    /// Values anchored on the per-stage measurements. Detector difficulty
    /// factors are neutral; resource costs split the additive model fitted
    /// on the combination grid into non-negative per-tier vectors.
    pub fn paper() -> Self {
        let od_h = Resources::new(2737.75, 0.0, 10.0, 2059.5);
        let od_l = Resources::new(0.0, 11.625, 0.0, 0.0);
        Self {
            od: TierPair {
                h: DetectorProfile {
                    model: "YOLO v3".into(),
                    fps: 12.0,
                    map: 0.963,
                    small_object_factor: 1.0,
                    distance_decay_per_m: 0.0,
                    spurious_detection_prob: 0.0,
                    latency_jitter_ms: 20.0,
                    position_noise: 0.01,
                    resources: od_h,
                },
                l: DetectorProfile {
                    model: "SSD Inception v2".into(),
                    fps: 39.0,
                    map: 0.797,
                    small_object_factor: 1.0,
                    distance_decay_per_m: 0.0,
                    spurious_detection_prob: 0.0,
                    latency_jitter_ms: 10.0,
                    position_noise: 0.01,
                    resources: od_l,
                },
            },
            asr: TierPair {
                h: AsrProfile {
                    model: "Modified Kaldi".into(),
                    transcription_ms: 1500.0,
                    network_rtt_ms: 0.0,
                    keyword_recall: 0.95,
                    wer: 0.125,
                    latency_jitter_ms: 100.0,
                    resources: Resources::new(1036.25, 6.375, 4.75, 0.0),
                },
                l: AsrProfile {
                    model: "IBM Watson Speech-to-Text".into(),
                    transcription_ms: 2500.0,
                    network_rtt_ms: 450.0,
                    keyword_recall: 0.72,
                    wer: 0.055,
                    latency_jitter_ms: 150.0,
                    resources: Resources::new(0.0, 0.0, 0.0, 25.0),
                },
            },
            tc: TierPair {
                h: ClassifierProfile {
                    model: "LSTM".into(),
                    latency_ms: 95.0,
                    label_accuracy: 0.977,
                    f1: 0.977,
                    latency_jitter_ms: 5.0,
                    resources: Resources::new(267.75, 0.625, 0.0, 0.0),
                },
                l: ClassifierProfile {
                    model: "SVM (linear kernel)".into(),
                    latency_ms: 5.0,
                    label_accuracy: 0.920,
                    f1: 0.920,
                    latency_jitter_ms: 1.0,
                    resources: Resources::new(0.0, 0.0, 0.25, 18.25),
                },
            },
            gr: TierPair {
                h: GestureProfile {
                    model: "LSTM".into(),
                    classifier_ms: 2.2,
                    recall: 0.77,
                    window_samples: 30,
                    sample_rate_hz: 145.0,
                    latency_jitter_ms: 10.0,
                    resources: Resources::new(58.5, 1.375, 0.75, 0.0),
                },
                l: GestureProfile {
                    model: "SVM (linear kernel)".into(),
                    classifier_ms: 0.1,
                    recall: 0.72,
                    window_samples: 30,
                    sample_rate_hz: 145.0,
                    latency_jitter_ms: 10.0,
                    resources: Resources::new(0.0, 0.0, 0.0, 18.25),
                },
            },
            fusion: FusionProfile {
                overhead_ms: 0.0,
                track_step: 0.01,
                base_resources: Resources::new(2115.25, 29.4375, 14.0, 3561.125),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let p: EngineProfiles = toml::from_str(text).map_err(|e| ProfileError::Malformed(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &str) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io { path: path.to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profiles serialize")
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        fn prob(field: String, v: f64) -> Result<(), ProfileError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ProfileError::Invalid { field, reason: format!("{v} is not a probability") })
            }
        }
        fn nonneg(field: String, v: f64) -> Result<(), ProfileError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ProfileError::Invalid { field, reason: format!("{v} must be >= 0") })
            }
        }
        fn resources(field: String, r: &Resources) -> Result<(), ProfileError> {
            for (name, v) in Resources::DIMENSIONS.iter().zip(r.to_array()) {
                nonneg(format!("{field}.resources.{name}"), v)?;
            }
            Ok(())
        }
        for tier in Tier::ALL {
            let od = self.od.get(tier);
            let k = format!("od.{tier}");
            if !(od.fps.is_finite() && od.fps > 0.0) {
                return Err(ProfileError::Invalid { field: format!("{k}.fps"), reason: "must be > 0".into() });
            }
            prob(format!("{k}.map"), od.map)?;
            nonneg(format!("{k}.small_object_factor"), od.small_object_factor)?;
            nonneg(format!("{k}.distance_decay_per_m"), od.distance_decay_per_m)?;
            prob(format!("{k}.spurious_detection_prob"), od.spurious_detection_prob)?;
            nonneg(format!("{k}.latency_jitter_ms"), od.latency_jitter_ms)?;
            nonneg(format!("{k}.position_noise"), od.position_noise)?;
            resources(k, &od.resources)?;

            let asr = self.asr.get(tier);
            let k = format!("asr.{tier}");
            nonneg(format!("{k}.transcription_ms"), asr.transcription_ms)?;
            nonneg(format!("{k}.network_rtt_ms"), asr.network_rtt_ms)?;
            prob(format!("{k}.keyword_recall"), asr.keyword_recall)?;
            nonneg(format!("{k}.latency_jitter_ms"), asr.latency_jitter_ms)?;
            if asr.latency_jitter_ms > asr.transcription_ms {
                return Err(ProfileError::Invalid { field: format!("{k}.latency_jitter_ms"), reason: "exceeds transcription_ms".into() });
            }
            resources(k, &asr.resources)?;

            let tc = self.tc.get(tier);
            let k = format!("tc.{tier}");
            nonneg(format!("{k}.latency_ms"), tc.latency_ms)?;
            prob(format!("{k}.label_accuracy"), tc.label_accuracy)?;
            nonneg(format!("{k}.latency_jitter_ms"), tc.latency_jitter_ms)?;
            if tc.latency_jitter_ms > tc.latency_ms {
                return Err(ProfileError::Invalid { field: format!("{k}.latency_jitter_ms"), reason: "exceeds latency_ms".into() });
            }
            resources(k, &tc.resources)?;

            let gr = self.gr.get(tier);
            let k = format!("gr.{tier}");
            nonneg(format!("{k}.classifier_ms"), gr.classifier_ms)?;
            prob(format!("{k}.recall"), gr.recall)?;
            if gr.window_samples == 0 || gr.sample_rate_hz.is_nan() || gr.sample_rate_hz <= 0.0 {
                return Err(ProfileError::Invalid { field: k, reason: "empty gesture window".into() });
            }
            nonneg(format!("{k}.latency_jitter_ms"), gr.latency_jitter_ms)?;
            resources(k, &gr.resources)?;
        }
        nonneg("fusion.track_step".into(), self.fusion.track_step)?;
        if !self.fusion.overhead_ms.is_finite() {
            return Err(ProfileError::Invalid { field: "fusion.overhead_ms".into(), reason: "must be finite".into() });
        }
        resources("fusion.base".into(), &self.fusion.base_resources)?;
        Ok(())
    }

    pub fn detection_probability(&self, obj: &SceneObject, tier: Tier) -> f64 {
        detection_probability(obj, self.od.get(tier))
    }

    /// Resource estimate for a combination: shared base plus the cost of
    /// each selected tier.
    pub fn predicted_resources(&self, combo: Combo) -> Resources {
        Engine::ALL.iter().fold(self.fusion.base_resources, |acc, e| {
            let tier = combo.tier(*e);
            acc + match e {
                Engine::Od => self.od.get(tier).resources,
                Engine::Asr => self.asr.get(tier).resources,
                Engine::Tc => self.tc.get(tier).resources,
                Engine::Gr => self.gr.get(tier).resources,
            }
        })
    }

    /// Success parameter of each engine per tier, used for monotonicity checks.
    pub fn success_parameters(&self, tier: Tier) -> [(Engine, f64); 4] {
        [
            (Engine::Od, self.od.get(tier).map),
            (Engine::Asr, self.asr.get(tier).keyword_recall),
            (Engine::Tc, self.tc.get(tier).label_accuracy),
            (Engine::Gr, self.gr.get(tier).recall),
        ]
    }
}

impl Default for EngineProfiles {
    fn default() -> Self {
        Self::paper()
    }
}
