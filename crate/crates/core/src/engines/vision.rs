use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{jittered, DetectorProfile};
use crate::lexicon::ClassId;
use crate::scene::{detection_probability, Detection, SceneContext};
use crate::types::{Point, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionResult {
    pub detections: Vec<Detection>,
    pub frames_processed: u32,
    pub elapsed_ms: f64,
    pub tier_used: Tier,
}

impl VisionResult {
    pub fn of_class(&self, class: ClassId) -> Vec<Detection> {
        self.detections.iter().filter(|d| d.class == class).cloned().collect()
    }

    pub fn has_class(&self, class: ClassId) -> bool {
        self.detections.iter().any(|d| d.class == class)
    }
}

/// One multi-frame detection pass over `scene`.
///
/// Each object of a wanted class is reported independently with its
/// detection probability. With probability `spurious_detection_prob` one
/// object of another class is also reported as the first wanted class.
/// Draws: three per scene object, then spurious flag, spurious pick, jitter.
pub fn detect_objects<R: Rng + ?Sized>(
    scene: &SceneContext,
    wanted: &[ClassId],
    profile: &DetectorProfile,
    tier: Tier,
    frames: u32,
    rng: &mut R,
) -> VisionResult {
    assert!(!wanted.is_empty(), "detection needs at least one wanted class");
    let noise = profile.position_noise;
    let mut detections = Vec::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        let u: f64 = rng.gen();
        let (nx, ny): (f64, f64) = (rng.gen(), rng.gen());
        if !wanted.contains(&obj.class) {
            continue;
        }
        let p = detection_probability(obj, profile);
        if u < p {
            let position =
                Point::new(obj.position.x + noise * (2.0 * nx - 1.0), obj.position.y + noise * (2.0 * ny - 1.0))
                    .clamped();
            detections.push(Detection { class: obj.class, position, confidence: p, source_object: Some(i) });
        }
    }

    let u_spurious: f64 = rng.gen();
    let u_pick: f64 = rng.gen();
    if u_spurious < profile.spurious_detection_prob {
        let others: Vec<usize> = scene
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| !wanted.contains(&o.class) && o.class != ClassId::HAND)
            .map(|(i, _)| i)
            .collect();
        if !others.is_empty() {
            let i = others[((u_pick * others.len() as f64) as usize).min(others.len() - 1)];
            detections.push(Detection {
                class: wanted[0],
                position: scene.objects[i].position,
                confidence: 0.5,
                source_object: Some(i),
            });
        }
    }

    let elapsed_ms = jittered(frames as f64 * profile.frame_ms(), profile.latency_jitter_ms, rng);
    VisionResult { detections, frames_processed: frames, elapsed_ms, tier_used: tier }
}

/// Follows a detection over `frames` frames with a bounded random walk.
/// Tracking adds no latency; it stands in for re-detection.
pub fn track_object<R: Rng + ?Sized>(detection: &Detection, frames: u32, step: f64, rng: &mut R) -> Vec<Detection> {
    let mut out = Vec::with_capacity(frames as usize);
    let mut current = detection.clone();
    for k in 0..frames {
        if k > 0 {
            let (dx, dy): (f64, f64) = (rng.gen(), rng.gen());
            current.position =
                Point::new(current.position.x + step * (2.0 * dx - 1.0), current.position.y + step * (2.0 * dy - 1.0))
                    .clamped();
        }
        out.push(current.clone());
    }
    out
}
