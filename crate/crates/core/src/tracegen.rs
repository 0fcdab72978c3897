//! Interaction traces: the ground-truth event stream a trial replays, and a
//! seeded generator for the benchmark protocol.
//!
//! A trace file holds one JSON object per line, ordered by `t_ms`:
//!
//! ```text
//! {"t_ms":1000.0,"interaction":0,"kind":"utterance","text":"what is this book","operation":"describe","object":"book","target":3,"multiplicity":"singular","deictic":true,"keywords":["what","this","book"]}
//! {"t_ms":1650.0,"interaction":0,"kind":"gesture","label":"pointing","hand":{"x":0.31,"y":0.69},"target":3}
//! ```
//!
//! `target` is the index of the intended object in the scene the trace was
//! generated for. `interaction` groups the events that form one command.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{lexicon, ClassId, Multiplicity};
use crate::scene::SceneContext;
use crate::seed::{Seed, Stream};
use crate::types::{Point, Timestamp};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: timestamp {t_ms} is earlier than the previous event")]
    OutOfOrder { line: usize, t_ms: f64 },
    #[error("scenario needs at least one interaction")]
    EmptyScenario,
    #[error("{op} scenario is incompatible with scene `{scene}`: {reason}")]
    Incompatible { op: ScenarioOp, scene: String, reason: String },
}

/// What the user actually asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Locate,
    Describe,
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureLabel {
    Pointing,
    ZoomIn,
    ZoomOut,
    Capture,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 4] =
        [GestureLabel::Pointing, GestureLabel::ZoomIn, GestureLabel::ZoomOut, GestureLabel::Capture];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub operation: Operation,
    #[serde(with = "class_name_opt", default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ClassId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    pub multiplicity: Multiplicity,
    pub deictic: bool,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub label: GestureLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Utterance(Utterance),
    Gesture(GestureEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ms: Timestamp,
    pub interaction: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Expected result of one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub interaction: u32,
    pub expected_operation: ExpectedOperation,
    pub expected_class: Option<ClassId>,
    pub expected_target: Option<usize>,
    pub multiplicity: Multiplicity,
    pub expected_viewport_effect: Option<GestureLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOperation {
    Locate,
    Describe,
    Zoom,
    Capture,
    NoOp,
}

mod class_name_opt {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<ClassId>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(id) => s.serialize_str(&id.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ClassId>, D::Error> {
        let name: Option<String> = Option::deserialize(d)?;
        match name {
            None => Ok(None),
            Some(n) => lexicon()
                .id_of(&n)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown object class `{n}`"))),
        }
    }
}

impl TraceEvent {
    fn validate(&self) -> Result<(), String> {
        match &self.kind {
            EventKind::Utterance(u) => {
                if u.deictic && u.operation != Operation::Describe {
                    return Err("deictic utterance must be a describe".into());
                }
                if u.operation != Operation::NoOp && u.object.is_none() {
                    return Err("command utterance without object".into());
                }
            }
            EventKind::Gesture(g) => {
                if let Some(h) = g.hand {
                    if !h.in_unit_square() {
                        return Err("hand position outside the unit square".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses a line-delimited trace. Blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent =
            serde_json::from_str(raw).map_err(|e| TraceError::Malformed { line, reason: e.to_string() })?;
        ev.validate().map_err(|reason| TraceError::Malformed { line, reason })?;
        if let Some(prev) = events.last() {
            if ev.t_ms < prev.t_ms {
                return Err(TraceError::OutOfOrder { line, t_ms: ev.t_ms.ms() });
            }
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn serialize_trace(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev).expect("trace event serializes"));
        out.push('\n');
    }
    out
}

/// Ground truth per interaction, in order of first appearance.
pub fn ground_truth(events: &[TraceEvent]) -> Vec<GroundTruth> {
    let mut ids: Vec<u32> = Vec::new();
    for ev in events {
        if !ids.contains(&ev.interaction) {
            ids.push(ev.interaction);
        }
    }
    ids.into_iter()
        .map(|id| {
            let utterance = events.iter().find_map(|e| match &e.kind {
                EventKind::Utterance(u) if e.interaction == id => Some(u),
                _ => None,
            });
            let gesture = events.iter().find_map(|e| match &e.kind {
                EventKind::Gesture(g) if e.interaction == id => Some(g),
                _ => None,
            });
            match (utterance, gesture) {
                (Some(u), _) => GroundTruth {
                    interaction: id,
                    expected_operation: match u.operation {
                        Operation::Locate => ExpectedOperation::Locate,
                        Operation::Describe => ExpectedOperation::Describe,
                        Operation::NoOp => ExpectedOperation::NoOp,
                    },
                    expected_class: u.object,
                    expected_target: u.target,
                    multiplicity: u.multiplicity,
                    expected_viewport_effect: None,
                },
                (None, Some(g)) => GroundTruth {
                    interaction: id,
                    expected_operation: match g.label {
                        GestureLabel::ZoomIn | GestureLabel::ZoomOut => ExpectedOperation::Zoom,
                        GestureLabel::Capture => ExpectedOperation::Capture,
                        GestureLabel::Pointing => ExpectedOperation::NoOp,
                    },
                    expected_class: None,
                    expected_target: g.target,
                    multiplicity: Multiplicity::Singular,
                    expected_viewport_effect: match g.label {
                        GestureLabel::Pointing => None,
                        l => Some(l),
                    },
                },
                (None, None) => unreachable!("interaction ids come from events"),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioOp {
    Locate,
    Describe,
    Zoom,
    Capture,
}

impl std::fmt::Display for ScenarioOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioOp::Locate => "locate",
            ScenarioOp::Describe => "describe",
            ScenarioOp::Zoom => "zoom",
            ScenarioOp::Capture => "capture",
        })
    }
}

impl std::str::FromStr for ScenarioOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "locate" | "o1" => Ok(ScenarioOp::Locate),
            "describe" | "o2" => Ok(ScenarioOp::Describe),
            "zoom" => Ok(ScenarioOp::Zoom),
            "capture" => Ok(ScenarioOp::Capture),
            other => Err(format!("unknown operation `{other}`")),
        }
    }
}

/// Generator knobs. The defaults are modelling choices, not measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    /// Fraction of Describe interactions phrased with "this" and paired with
    /// a pointing gesture.
    pub deictic_fraction: f64,
    pub first_at_ms: f64,
    pub spacing_ms: f64,
    /// Pointing starts uniformly within this range after the utterance.
    pub gesture_offset_ms: (f64, f64),
    /// Half-width of the hand's offset from the pointed-at object.
    pub hand_offset: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            deictic_fraction: 0.5,
            first_at_ms: 1000.0,
            spacing_ms: 10_000.0,
            gesture_offset_ms: (200.0, 1500.0),
            hand_offset: 0.04,
        }
    }
}

const LOCATE_TEMPLATES: &[&str] = &["locate the {}", "where is the {}", "find the {}", "show me where the {} is"];
const DESCRIBE_TEMPLATES: &[&str] = &["describe the {}", "show me the details of the {}", "tell me about the {}"];
const DEICTIC_TEMPLATES: &[&str] = &["what is this {}", "describe this {}", "tell me about this {}"];
const STOPWORDS: &[&str] = &["the", "is", "me", "of", "about", "a", "an", "to"];

/// Content words of an utterance, in order.
pub fn keywords(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn phrase(template: &str, class: ClassId, rng: &mut impl Rng) -> String {
    let forms = &lexicon().class(class).expect("scene classes are lexicon classes").synonyms;
    let form = forms.choose(rng).expect("every class has a surface form");
    template.replace("{}", form)
}

/// Generates `n` interactions of one operation against `scene`.
pub fn generate_scenario(
    op: ScenarioOp,
    scene: &SceneContext,
    n: usize,
    seed: Seed,
    params: &ScenarioParams,
) -> Result<Vec<TraceEvent>, TraceError> {
    if n == 0 {
        return Err(TraceError::EmptyScenario);
    }
    let mut rng = seed.rng(Stream::Scenario, 0);
    let incompatible = |reason: &str| TraceError::Incompatible { op, scene: scene.name.clone(), reason: reason.to_string() };
    let non_hand: Vec<usize> =
        scene.objects.iter().enumerate().filter(|(_, o)| o.class != ClassId::HAND).map(|(i, _)| i).collect();

    let mut events = Vec::new();
    match op {
        ScenarioOp::Locate => {
            if non_hand.is_empty() {
                return Err(incompatible("no locatable objects"));
            }
            for k in 0..n {
                let t = params.first_at_ms + k as f64 * params.spacing_ms;
                let target = *non_hand.choose(&mut rng).unwrap();
                let class = scene.objects[target].class;
                let template = LOCATE_TEMPLATES.choose(&mut rng).unwrap();
                let text = phrase(template, class, &mut rng);
                events.push(utterance_event(t, k as u32, text, Operation::Locate, class, target, false));
            }
        }
        ScenarioOp::Describe => {
            let duplicated = scene.duplicated_classes();
            let ambiguous: Vec<usize> =
                non_hand.iter().copied().filter(|i| duplicated.contains(&scene.objects[*i].class)).collect();
            let explicit: Vec<usize> =
                non_hand.iter().copied().filter(|i| !duplicated.contains(&scene.objects[*i].class)).collect();
            let n_deictic = (n as f64 * params.deictic_fraction.clamp(0.0, 1.0)).round() as usize;
            if n_deictic > 0 && ambiguous.is_empty() {
                return Err(incompatible("deictic describe needs a class with two or more instances"));
            }
            if n_deictic < n && explicit.is_empty() {
                return Err(incompatible("explicit describe needs a class with a single instance"));
            }
            let mut deictic_flags: Vec<bool> = (0..n).map(|k| k < n_deictic).collect();
            deictic_flags.shuffle(&mut rng);
            for (k, deictic) in deictic_flags.into_iter().enumerate() {
                let t = params.first_at_ms + k as f64 * params.spacing_ms;
                let pool = if deictic { &ambiguous } else { &explicit };
                let target = *pool.choose(&mut rng).unwrap();
                let class = scene.objects[target].class;
                let templates = if deictic { DEICTIC_TEMPLATES } else { DESCRIBE_TEMPLATES };
                let text = phrase(templates.choose(&mut rng).unwrap(), class, &mut rng);
                events.push(utterance_event(t, k as u32, text, Operation::Describe, class, target, deictic));
                if deictic {
                    let (lo, hi) = params.gesture_offset_ms;
                    let offset = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    let at = scene.objects[target].position;
                    let h = params.hand_offset;
                    let jitter = |rng: &mut crate::seed::SimRng| if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 };
                    let hand = Point::new(at.x + jitter(&mut rng), at.y + jitter(&mut rng)).clamped();
                    events.push(TraceEvent {
                        t_ms: Timestamp::from_ms(t + offset),
                        interaction: k as u32,
                        kind: EventKind::Gesture(GestureEvent {
                            label: GestureLabel::Pointing,
                            hand: Some(hand),
                            target: Some(target),
                        }),
                    });
                }
            }
        }
        ScenarioOp::Zoom | ScenarioOp::Capture => {
            for k in 0..n {
                let t = params.first_at_ms + k as f64 * params.spacing_ms;
                let label = match op {
                    ScenarioOp::Capture => GestureLabel::Capture,
                    _ if rng.gen_bool(0.5) => GestureLabel::ZoomIn,
                    _ => GestureLabel::ZoomOut,
                };
                events.push(TraceEvent {
                    t_ms: Timestamp::from_ms(t),
                    interaction: k as u32,
                    kind: EventKind::Gesture(GestureEvent { label, hand: None, target: None }),
                });
            }
        }
    }
    events.sort_by_key(|e| e.t_ms);
    Ok(events)
}

fn utterance_event(
    t: f64,
    interaction: u32,
    text: String,
    operation: Operation,
    class: ClassId,
    target: usize,
    deictic: bool,
) -> TraceEvent {
    TraceEvent {
        t_ms: Timestamp::from_ms(t),
        interaction,
        kind: EventKind::Utterance(Utterance {
            keywords: keywords(&text),
            text,
            operation,
            object: Some(class),
            target: Some(target),
            multiplicity: Multiplicity::Singular,
            deictic,
        }),
    }
}

/// Copy of a trace with every gesture event removed.
pub fn without_gestures(events: &[TraceEvent]) -> Vec<TraceEvent> {
    events.iter().filter(|e| matches!(e.kind, EventKind::Utterance(_))).cloned().collect()
}
