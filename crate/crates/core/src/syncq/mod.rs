//! The communication queue between the modality engines and the fusion
//! consumer, with soft timestamp matching and a bounded wait on vision.

mod matcher;
mod queue;

pub use matcher::{arrival_order, greedy_pairs, match_stream, MatchPolicy, MatchedBundle, Matcher};
pub use queue::{
    EnvelopeError, ModalityToken, ProducerId, QueueError, SyncQueue, TokenEnvelope, DEFAULT_CAPACITY,
};

use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::engines::VisionResult;
use crate::types::Timestamp;

/// Runs one thread per producer against a shared bounded queue, collects
/// everything on the calling thread, then matches in virtual time. Gives the
/// same bundles as [`match_stream`] on the same tokens.
pub fn match_live(
    producers: Vec<Vec<TokenEnvelope>>,
    capacity: usize,
    policy: MatchPolicy,
) -> Result<Vec<MatchedBundle>, QueueError> {
    let queue = SyncQueue::new(capacity);
    let mut collected = Vec::new();
    let result = thread::scope(|s| {
        let handles: Vec<_> = producers
            .into_iter()
            .map(|items| {
                let q = queue.clone();
                s.spawn(move || -> Result<(), QueueError> {
                    for env in items {
                        push_with_backoff(&q, env)?;
                    }
                    Ok(())
                })
            })
            .collect();
        while handles.iter().any(|h| !h.is_finished()) {
            collected.extend(queue.drain_wait(Duration::from_millis(1)));
        }
        let mut status = Ok(());
        for h in handles {
            let r = h.join().expect("producer thread panicked");
            if status.is_ok() {
                status = r;
            }
        }
        status
    });
    collected.extend(queue.drain());
    queue.close();
    result?;
    Ok(match_stream(collected, policy))
}

/// Retries a full queue for a bounded time before reporting a stall.
fn push_with_backoff(queue: &SyncQueue, env: TokenEnvelope) -> Result<(), QueueError> {
    const ATTEMPTS: u32 = 10_000;
    let mut env = Some(env);
    for _ in 0..ATTEMPTS {
        match queue.enqueue(env.clone().expect("envelope present")) {
            Ok(()) => {
                env.take();
                return Ok(());
            }
            Err(QueueError::Full { .. }) => thread::sleep(Duration::from_micros(100)),
            Err(e) => return Err(e),
        }
    }
    Err(QueueError::Full { capacity: queue.capacity() })
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no outstanding vision request")]
pub struct NoOutstandingRequest;

/// A vision request issued at `issued_at` whose result will take
/// `result.elapsed_ms` to arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingVision {
    pub issued_at: Timestamp,
    pub result: VisionResult,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VisionWait {
    Ready { result: VisionResult, at: Timestamp },
    Timeout { at: Timestamp },
}

/// Virtual-time wait. A result arriving exactly at the timeout counts.
pub fn await_vision(pending: Option<PendingVision>, timeout_ms: f64) -> Result<VisionWait, NoOutstandingRequest> {
    let p = pending.ok_or(NoOutstandingRequest)?;
    if p.result.elapsed_ms <= timeout_ms {
        let at = p.issued_at + p.result.elapsed_ms;
        Ok(VisionWait::Ready { result: p.result, at })
    } else {
        Ok(VisionWait::Timeout { at: p.issued_at + timeout_ms })
    }
}

/// Wall-clock wait on a vision worker's channel. `Ok(None)` is a timeout;
/// a disconnected worker counts as one.
pub fn await_vision_live(
    rx: Option<&Receiver<VisionResult>>,
    timeout: Duration,
) -> Result<Option<VisionResult>, NoOutstandingRequest> {
    let rx = rx.ok_or(NoOutstandingRequest)?;
    match rx.recv_timeout(timeout) {
        Ok(r) => Ok(Some(r)),
        Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => Ok(None),
    }
}
