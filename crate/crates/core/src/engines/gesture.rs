use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{jittered, GestureProfile};
use crate::tracegen::{GestureEvent, GestureLabel};
use crate::types::{Point, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureToken {
    pub interaction: u32,
    pub label: GestureLabel,
    /// Present iff `label` is pointing.
    pub hand: Option<Point>,
    /// Capture time: start of the gesture.
    pub t: Timestamp,
    /// Window fill plus classifier time.
    pub gr_ms: f64,
}

impl GestureToken {
    pub fn ready(&self) -> Timestamp {
        self.t + self.gr_ms
    }
}

/// Hand position assumed when a non-pointing gesture is misread as pointing.
const FALLBACK_HAND: Point = Point::new(0.5, 0.5);

/// Classifies a gesture. Correct with probability `recall`; errors are
/// uniform over the other three labels.
pub fn recognize_gesture<R: Rng + ?Sized>(
    event: &GestureEvent,
    t: Timestamp,
    interaction: u32,
    profile: &GestureProfile,
    rng: &mut R,
) -> GestureToken {
    let gr_ms = jittered(profile.window_fill_ms() + profile.classifier_ms, profile.latency_jitter_ms, rng);
    let u_label: f64 = rng.gen();
    let u_confuse: f64 = rng.gen();
    let label = if u_label < profile.recall {
        event.label
    } else {
        let others: Vec<GestureLabel> = GestureLabel::ALL.iter().copied().filter(|l| *l != event.label).collect();
        others[((u_confuse * others.len() as f64) as usize).min(others.len() - 1)]
    };
    let hand = (label == GestureLabel::Pointing).then(|| event.hand.unwrap_or(FALLBACK_HAND));
    GestureToken { interaction, label, hand, t, gr_ms }
}
