//! The fusion consumer: turns matched bundles into interaction outcomes by
//! running the vision engine and the four interaction primitives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FusionConfig;
use crate::engines::{
    detect_objects, track_object, AuralOperation, AuralToken, EngineProfiles, GestureToken, VisionResult,
};
use crate::lexicon::{lexicon, ClassId, Multiplicity};
use crate::scene::{nearest_object, Detection, SceneContext};
use crate::seed::{Seed, SimRng, Stream};
use crate::syncq::{await_vision, MatchedBundle, PendingVision, VisionWait};
use crate::tracegen::{ExpectedOperation, GestureLabel, GroundTruth};
use crate::types::{Tier, Timestamp};

pub const ZOOM_STEP: f64 = 1.5;
pub const MAX_ZOOM: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportState {
    pub zoom_level: f64,
    pub captured_frames: Vec<u64>,
}

impl Default for ViewportState {
    fn default() -> Self {
        Self { zoom_level: 1.0, captured_frames: Vec::new() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{primitive} cannot apply a {label:?} gesture")]
pub struct WrongLabel {
    pub primitive: &'static str,
    pub label: GestureLabel,
}

pub fn apply_zoom(gesture: &GestureToken, viewport: &ViewportState) -> Result<ViewportState, WrongLabel> {
    let zoom_level = match gesture.label {
        GestureLabel::ZoomIn => viewport.zoom_level * ZOOM_STEP,
        GestureLabel::ZoomOut => viewport.zoom_level / ZOOM_STEP,
        label => return Err(WrongLabel { primitive: "zoom", label }),
    };
    Ok(ViewportState { zoom_level: zoom_level.clamp(1.0, MAX_ZOOM), ..viewport.clone() })
}

pub fn apply_capture(
    gesture: &GestureToken,
    viewport: &ViewportState,
    frame_id: u64,
) -> Result<ViewportState, WrongLabel> {
    if gesture.label != GestureLabel::Capture {
        return Err(WrongLabel { primitive: "capture", label: gesture.label });
    }
    let mut next = viewport.clone();
    next.captured_frames.push(frame_id);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Asr,
    Tc,
    Gr,
    SyncWait,
    FusionWait,
    Od,
    OdEscalation,
    Fusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeOperation {
    Locate,
    Describe,
    Zoom,
    Capture,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoOp,
    NeedsGesture,
    HandMissing,
    Timeout,
    UnpairedPointing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub interaction: u32,
    pub operation: OutcomeOperation,
    pub reject_reason: Option<RejectReason>,
    /// Viewport gesture applied, for zoom and capture outcomes.
    pub gesture_label: Option<GestureLabel>,
    pub targets: Vec<Detection>,
    /// Filled in by scoring against ground truth.
    pub correct: Option<bool>,
    pub latency_breakdown: BTreeMap<Stage, f64>,
    pub total_latency_ms: f64,
    pub escalated: bool,
}

impl InteractionOutcome {
    pub fn stage(&self, stage: Stage) -> f64 {
        self.latency_breakdown.get(&stage).copied().unwrap_or(0.0)
    }

    /// Indices of the scene objects behind the targets.
    pub fn target_objects(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.targets.iter().filter_map(|d| d.source_object).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// What a detection request looks for, and which classes must all be
/// present before the result is accepted without escalation.
#[derive(Debug, Clone)]
pub struct VisionRequest {
    pub scene: SceneContext,
    pub wanted: Vec<ClassId>,
    pub required: Vec<ClassId>,
}

impl VisionRequest {
    fn satisfied_by(&self, result: &VisionResult) -> bool {
        self.required.iter().all(|c| result.has_class(*c))
    }
}

/// Second pass on the heavy detector. Returns `None` when the prior pass was
/// already heavy or found every required class.
pub fn escalate_detector(
    request: &VisionRequest,
    prior: &VisionResult,
    profiles: &EngineProfiles,
    config: &FusionConfig,
    rng: &mut SimRng,
) -> Option<VisionResult> {
    if prior.tier_used == Tier::H || request.satisfied_by(prior) {
        return None;
    }
    Some(detect_objects(&request.scene, &request.wanted, &profiles.od.h, Tier::H, config.frames_per_output, rng))
}

struct Detected {
    result: Option<VisionResult>,
    od_ms: f64,
    escalation_ms: f64,
    escalated: bool,
}

/// What resolving a bundle produced before latency bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub operation: OutcomeOperation,
    pub reject: Option<RejectReason>,
    pub gesture_label: Option<GestureLabel>,
    pub targets: Vec<Detection>,
    pub od_ms: f64,
    pub escalation_ms: f64,
    pub escalated: bool,
}

impl Resolution {
    fn rejected(reason: RejectReason) -> Self {
        Self {
            operation: OutcomeOperation::Rejected,
            reject: Some(reason),
            gesture_label: None,
            targets: Vec::new(),
            od_ms: 0.0,
            escalation_ms: 0.0,
            escalated: false,
        }
    }

    fn found(operation: OutcomeOperation, targets: Vec<Detection>, d: &Detected) -> Self {
        Self {
            operation,
            reject: None,
            gesture_label: None,
            targets,
            od_ms: d.od_ms,
            escalation_ms: d.escalation_ms,
            escalated: d.escalated,
        }
    }

    fn rejected_after(reason: RejectReason, d: &Detected) -> Self {
        Self { od_ms: d.od_ms, escalation_ms: d.escalation_ms, escalated: d.escalated, ..Self::rejected(reason) }
    }
}

/// Single fusion consumer for one trial. Owns the viewport and processes
/// one bundle at a time.
pub struct FusionEngine<'a> {
    config: &'a FusionConfig,
    profiles: &'a EngineProfiles,
    scene: &'a SceneContext,
    seed: Seed,
    pub viewport: ViewportState,
    busy_until: Timestamp,
    next_frame: u64,
}

impl<'a> FusionEngine<'a> {
    pub fn new(config: &'a FusionConfig, profiles: &'a EngineProfiles, scene: &'a SceneContext, seed: Seed) -> Self {
        Self {
            config,
            profiles,
            scene,
            seed,
            viewport: ViewportState::default(),
            busy_until: Timestamp::ZERO,
            next_frame: 0,
        }
    }

    pub fn fuse(&mut self, bundle: &MatchedBundle) -> InteractionOutcome {
        let start = bundle.emitted_at.max(self.busy_until);
        let resolution = match (&bundle.aural, &bundle.gesture) {
            (Some(a), g) => match a.operation {
                AuralOperation::Locate => self.resolve_locate(a, start),
                AuralOperation::DescribeExplicit | AuralOperation::DescribeAmbiguous => {
                    self.resolve_describe(a, g.as_ref(), start)
                }
                AuralOperation::NoOp => match g {
                    Some(g) => self.describe_pointed(a.interaction, g, start),
                    None => Resolution::rejected(RejectReason::NoOp),
                },
            },
            (None, Some(g)) => self.apply_gesture(g),
            (None, None) => unreachable!("bundle needs a token"),
        };

        let mut breakdown = BTreeMap::new();
        match &bundle.aural {
            Some(a) => {
                breakdown.insert(Stage::Asr, a.asr_ms);
                breakdown.insert(Stage::Tc, a.tc_ms);
                breakdown.insert(Stage::SyncWait, bundle.emitted_at - a.ready());
            }
            None => {
                let g = bundle.gesture.as_ref().expect("gesture-only bundle");
                breakdown.insert(Stage::Gr, g.gr_ms);
                breakdown.insert(Stage::SyncWait, bundle.emitted_at - g.ready());
            }
        }
        breakdown.insert(Stage::FusionWait, start - bundle.emitted_at);
        breakdown.insert(Stage::Od, resolution.od_ms);
        breakdown.insert(Stage::OdEscalation, resolution.escalation_ms);
        let overhead = if bundle.aural.is_some() { self.profiles.fusion.overhead_ms } else { 0.0 };
        breakdown.insert(Stage::Fusion, overhead);
        let total_latency_ms = breakdown.values().sum();

        let busy = resolution.od_ms + resolution.escalation_ms + overhead.max(0.0);
        self.busy_until = start + busy;

        InteractionOutcome {
            interaction: bundle.interaction(),
            operation: resolution.operation,
            reject_reason: resolution.reject,
            gesture_label: resolution.gesture_label,
            targets: resolution.targets,
            correct: None,
            latency_breakdown: breakdown,
            total_latency_ms,
            escalated: resolution.escalated,
        }
    }

    fn detect(&self, interaction: u32, request: &VisionRequest, start: Timestamp) -> Detected {
        let tier = self.config.od;
        let frames = self.config.frames_per_output;
        let wait = self.config.vision_wait_ms;
        let mut rng = self.seed.rng(Stream::Od, interaction as u64);
        let first = detect_objects(&request.scene, &request.wanted, self.profiles.od.get(tier), tier, frames, &mut rng);
        let first = match await_vision(Some(PendingVision { issued_at: start, result: first }), wait) {
            Ok(VisionWait::Ready { result, .. }) => result,
            _ => return Detected { result: None, od_ms: wait, escalation_ms: 0.0, escalated: false },
        };
        let od_ms = first.elapsed_ms;
        let mut esc_rng = self.seed.rng(Stream::OdEscalation, interaction as u64);
        match escalate_detector(request, &first, self.profiles, self.config, &mut esc_rng) {
            None => Detected { result: Some(first), od_ms, escalation_ms: 0.0, escalated: false },
            Some(second) => {
                let issued_at = start + od_ms;
                match await_vision(Some(PendingVision { issued_at, result: second }), wait) {
                    Ok(VisionWait::Ready { result, .. }) => {
                        Detected { escalation_ms: result.elapsed_ms, result: Some(result), od_ms, escalated: true }
                    }
                    _ => Detected { result: None, od_ms, escalation_ms: wait, escalated: true },
                }
            }
        }
    }

    /// Finds every instance of the named class.
    pub fn resolve_locate(&self, aural: &AuralToken, start: Timestamp) -> Resolution {
        let class = aural.object.expect("locate token names an object");
        let request = VisionRequest { scene: self.scene.clone(), wanted: vec![class], required: vec![class] };
        let d = self.detect(aural.interaction, &request, start);
        let Some(result) = &d.result else {
            return Resolution::rejected_after(RejectReason::Timeout, &d);
        };
        let mut rng = self.seed.rng(Stream::Tracker, aural.interaction as u64);
        let frames = self.config.frames_per_output;
        let targets = result
            .of_class(class)
            .iter()
            .map(|det| {
                let track = track_object(det, frames, self.profiles.fusion.track_step, &mut rng);
                track.last().cloned().unwrap_or_else(|| det.clone())
            })
            .collect();
        Resolution::found(OutcomeOperation::Locate, targets, &d)
    }

    /// Describe with multiplicity checks and pointing disambiguation.
    pub fn resolve_describe(&self, aural: &AuralToken, gesture: Option<&GestureToken>, start: Timestamp) -> Resolution {
        let hand_at = gesture.and_then(|g| g.hand);
        if aural.operation == AuralOperation::DescribeAmbiguous && hand_at.is_none() {
            return Resolution::rejected(RejectReason::NeedsGesture);
        }
        let class = aural.object.expect("describe token names an object");
        let (scene, wanted) = match hand_at {
            Some(h) => (self.scene.with_hand(h), vec![class, ClassId::HAND]),
            None => (self.scene.clone(), vec![class]),
        };
        let request = VisionRequest { scene, required: wanted.clone(), wanted };
        let d = self.detect(aural.interaction, &request, start);
        let Some(result) = &d.result else {
            return Resolution::rejected_after(RejectReason::Timeout, &d);
        };
        let candidates = result.of_class(class);
        if candidates.len() <= 1 || aural.multiplicity == Multiplicity::Plural {
            return Resolution::found(OutcomeOperation::Describe, candidates, &d);
        }
        if hand_at.is_none() {
            return Resolution::rejected_after(RejectReason::NeedsGesture, &d);
        }
        match result.of_class(ClassId::HAND).first() {
            None => Resolution::rejected_after(RejectReason::HandMissing, &d),
            Some(hand) => {
                let i = nearest_object(&candidates, hand.position).expect("several candidates");
                Resolution::found(OutcomeOperation::Describe, vec![candidates[i].clone()], &d)
            }
        }
    }

    /// Pointing with an unrecognised utterance: describe whatever object is
    /// nearest the hand.
    fn describe_pointed(&self, interaction: u32, gesture: &GestureToken, start: Timestamp) -> Resolution {
        let hand_at = gesture.hand.expect("pointing token has a hand");
        let mut wanted: Vec<ClassId> =
            lexicon().classes().iter().map(|c| c.id).filter(|c| *c != ClassId::HAND).collect();
        wanted.push(ClassId::HAND);
        let request = VisionRequest { scene: self.scene.with_hand(hand_at), wanted, required: vec![ClassId::HAND] };
        let d = self.detect(interaction, &request, start);
        let Some(result) = &d.result else {
            return Resolution::rejected_after(RejectReason::Timeout, &d);
        };
        let Some(hand) = result.of_class(ClassId::HAND).first().cloned() else {
            return Resolution::rejected_after(RejectReason::HandMissing, &d);
        };
        let candidates: Vec<Detection> =
            result.detections.iter().filter(|x| x.class != ClassId::HAND).cloned().collect();
        let targets = match nearest_object(&candidates, hand.position) {
            Ok(i) => vec![candidates[i].clone()],
            Err(_) => Vec::new(),
        };
        Resolution::found(OutcomeOperation::Describe, targets, &d)
    }

    fn apply_gesture(&mut self, gesture: &GestureToken) -> Resolution {
        let mut r = match gesture.label {
            GestureLabel::Pointing => return Resolution::rejected(RejectReason::UnpairedPointing),
            GestureLabel::ZoomIn | GestureLabel::ZoomOut => {
                self.viewport = apply_zoom(gesture, &self.viewport).expect("zoom label");
                Resolution::rejected(RejectReason::NoOp)
            }
            GestureLabel::Capture => {
                self.viewport = apply_capture(gesture, &self.viewport, self.next_frame).expect("capture label");
                self.next_frame += 1;
                Resolution::rejected(RejectReason::NoOp)
            }
        };
        r.operation = match gesture.label {
            GestureLabel::Capture => OutcomeOperation::Capture,
            _ => OutcomeOperation::Zoom,
        };
        r.reject = None;
        r.gesture_label = Some(gesture.label);
        r
    }
}

/// One-shot fusion of a single bundle on a fresh consumer.
pub fn fuse(
    bundle: &MatchedBundle,
    scene: &SceneContext,
    config: &FusionConfig,
    profiles: &EngineProfiles,
    seed: Seed,
) -> InteractionOutcome {
    FusionEngine::new(config, profiles, scene, seed).fuse(bundle)
}

/// Whether an outcome does what the user meant.
pub fn score(outcome: &InteractionOutcome, truth: &GroundTruth, scene: &SceneContext) -> bool {
    let hit = outcome.target_objects();
    match truth.expected_operation {
        ExpectedOperation::Locate => {
            outcome.operation == OutcomeOperation::Locate
                && truth.expected_target.is_some_and(|t| hit.contains(&t))
        }
        ExpectedOperation::Describe => {
            let expected: Vec<usize> = match (truth.multiplicity, truth.expected_class) {
                (Multiplicity::Plural, Some(c)) => scene.instances_of(c),
                _ => truth.expected_target.into_iter().collect(),
            };
            outcome.operation == OutcomeOperation::Describe && !expected.is_empty() && hit == expected
        }
        ExpectedOperation::Zoom => {
            outcome.operation == OutcomeOperation::Zoom && outcome.gesture_label == truth.expected_viewport_effect
        }
        ExpectedOperation::Capture => outcome.operation == OutcomeOperation::Capture,
        ExpectedOperation::NoOp => outcome.operation == OutcomeOperation::Rejected,
    }
}
