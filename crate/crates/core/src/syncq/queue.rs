use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::{AuralToken, GestureToken};
use crate::types::Timestamp;

pub const DEFAULT_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProducerId(pub u32);

impl ProducerId {
    pub const AURAL: ProducerId = ProducerId(0);
    pub const GESTURE: ProducerId = ProducerId(1);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "modality", rename_all = "lowercase")]
pub enum ModalityToken {
    Aural(AuralToken),
    Gesture(GestureToken),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEnvelope {
    pub producer: ProducerId,
    pub payload: ModalityToken,
    pub capture_t: Timestamp,
    pub enqueue_t: Timestamp,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("envelope enqueued at {enqueue_t} before its capture at {capture_t}")]
pub struct EnvelopeError {
    pub capture_t: Timestamp,
    pub enqueue_t: Timestamp,
}

impl TokenEnvelope {
    pub fn new(
        producer: ProducerId,
        payload: ModalityToken,
        capture_t: Timestamp,
        enqueue_t: Timestamp,
    ) -> Result<Self, EnvelopeError> {
        if enqueue_t < capture_t {
            return Err(EnvelopeError { capture_t, enqueue_t });
        }
        Ok(Self { producer, payload, capture_t, enqueue_t })
    }

    /// Envelope stamped with the token's own capture and ready times.
    pub fn aural(token: AuralToken) -> Self {
        let (capture_t, enqueue_t) = (token.t, token.ready());
        Self { producer: ProducerId::AURAL, payload: ModalityToken::Aural(token), capture_t, enqueue_t }
    }

    pub fn gesture(token: GestureToken) -> Self {
        let (capture_t, enqueue_t) = (token.t, token.ready());
        Self { producer: ProducerId::GESTURE, payload: ModalityToken::Gesture(token), capture_t, enqueue_t }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("queue is closed")]
    Closed,
    #[error("queue is full ({capacity} tokens); the consumer has stalled")]
    Full { capacity: usize },
}

#[derive(Debug, Default)]
struct State {
    items: VecDeque<TokenEnvelope>,
    closed: bool,
}

#[derive(Debug)]
struct Shared {
    state: Mutex<State>,
    ready: Condvar,
    capacity: usize,
}

/// Bounded multi-producer, single-consumer token queue. Clones share the
/// same queue.
#[derive(Debug, Clone)]
pub struct SyncQueue {
    shared: Arc<Shared>,
}

impl Default for SyncQueue {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl SyncQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            shared: Arc::new(Shared { state: Mutex::new(State::default()), ready: Condvar::new(), capacity }),
        }
    }

    pub fn capacity(&self) -> usize {
        self.shared.capacity
    }

    /// Non-blocking enqueue.
    pub fn enqueue(&self, envelope: TokenEnvelope) -> Result<(), QueueError> {
        let mut state = self.shared.state.lock().expect("queue lock poisoned");
        if state.closed {
            return Err(QueueError::Closed);
        }
        if state.items.len() >= self.shared.capacity {
            return Err(QueueError::Full { capacity: self.shared.capacity });
        }
        state.items.push_back(envelope);
        self.shared.ready.notify_one();
        Ok(())
    }

    /// Takes everything currently queued.
    pub fn drain(&self) -> Vec<TokenEnvelope> {
        let mut state = self.shared.state.lock().expect("queue lock poisoned");
        state.items.drain(..).collect()
    }

    /// Like [`drain`](Self::drain) but waits up to `timeout` for a token when
    /// the queue is empty and open.
    pub fn drain_wait(&self, timeout: Duration) -> Vec<TokenEnvelope> {
        let state = self.shared.state.lock().expect("queue lock poisoned");
        let (mut state, _) = self
            .shared
            .ready
            .wait_timeout_while(state, timeout, |s| s.items.is_empty() && !s.closed)
            .expect("queue lock poisoned");
        state.items.drain(..).collect()
    }

    pub fn close(&self) {
        let mut state = self.shared.state.lock().expect("queue lock poisoned");
        state.closed = true;
        self.shared.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.shared.state.lock().expect("queue lock poisoned").closed
    }

    pub fn len(&self) -> usize {
        self.shared.state.lock().expect("queue lock poisoned").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
