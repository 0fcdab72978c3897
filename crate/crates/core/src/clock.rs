//! Virtual clock used by the discrete-event simulation.

use crate::types::Timestamp;

/// Monotone virtual time. Never moves backwards.
#[derive(Debug, Clone, Copy, Default)]
pub struct VirtualClock {
    now: Timestamp,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    /// Moves the clock to `t` if `t` is in the future; earlier times are ignored.
    pub fn advance_to(&mut self, t: Timestamp) -> Timestamp {
        self.now = self.now.max(t);
        self.now
    }

    pub fn advance_by(&mut self, ms: f64) -> Timestamp {
        assert!(ms >= 0.0, "clock cannot run backwards");
        self.now = self.now + ms;
        self.now
    }
}
