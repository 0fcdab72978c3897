//! Simulated perception engines. Each one maps a ground-truth input plus a
//! random sub-stream to a token and a latency. Every call consumes the same
//! number of draws regardless of tier or outcome, so two configurations run
//! on the same seed see coupled randomness.

mod asr;
mod gesture;
mod profile;
mod text;
mod vision;

pub use asr::{simulate_asr, AsrOutput};
pub use gesture::{recognize_gesture, GestureToken};
pub use profile::{
    AsrProfile, ClassifierProfile, DetectorProfile, EngineProfiles, FusionProfile, GestureProfile, ProfileError,
    TierPair,
};
pub use text::{aural_token, classify_text, AuralOperation, AuralToken, TextLabel};
pub use vision::{detect_objects, track_object, VisionResult};

use rand::Rng;

/// `base` plus uniform jitter of half-width `half`, never negative. Always
/// consumes exactly one draw.
pub(crate) fn jittered<R: Rng + ?Sized>(base: f64, half: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    (base + half * (2.0 * u - 1.0)).max(0.0)
}
