use serde::{Deserialize, Serialize};

use super::queue::{ModalityToken, TokenEnvelope};
use crate::config::FusionConfig;
use crate::engines::{AuralOperation, AuralToken, GestureToken};
use crate::tracegen::GestureLabel;
use crate::types::Timestamp;

/// A fused unit of input handed to the fusion engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedBundle {
    pub aural: Option<AuralToken>,
    pub gesture: Option<GestureToken>,
    /// Capture time the interaction's latency is measured from: the aural
    /// token's if present, else the gesture's.
    pub anchor_t: Timestamp,
    /// When the queue released the bundle to the consumer.
    pub emitted_at: Timestamp,
}

impl MatchedBundle {
    fn new(aural: Option<AuralToken>, gesture: Option<GestureToken>, emitted_at: Timestamp) -> Self {
        let anchor_t = match (&aural, &gesture) {
            (Some(a), _) => a.t,
            (None, Some(g)) => g.t,
            (None, None) => unreachable!("bundle needs a token"),
        };
        Self { aural, gesture, anchor_t, emitted_at }
    }

    pub fn interaction(&self) -> u32 {
        match (&self.aural, &self.gesture) {
            (Some(a), _) => a.interaction,
            (None, Some(g)) => g.interaction,
            (None, None) => unreachable!("bundle needs a token"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPolicy {
    pub window_ms: f64,
    /// Extra time an unpaired pointing gesture waits for a late aural token.
    pub pointing_hold_ms: f64,
}

impl MatchPolicy {
    pub fn from_config(config: &FusionConfig) -> Self {
        Self { window_ms: config.match_window_ms, pointing_hold_ms: config.pointing_hold_ms }
    }
}

/// Greedy soft matching: repeatedly takes the pair with the smallest gap
/// `|a - g| <= window`, ties broken by aural then gesture index, until no
/// pair of unused tokens is left. Returns `(aural, gesture)` index pairs in
/// the order chosen.
pub fn greedy_pairs(aural: &[Timestamp], gestures: &[Timestamp], window_ms: f64) -> Vec<(usize, usize)> {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in aural.iter().enumerate() {
        for (j, g) in gestures.iter().enumerate() {
            let gap = (*a - *g).abs();
            if gap <= window_ms {
                edges.push((gap, i, j));
            }
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; aural.len()];
    let mut used_g = vec![false; gestures.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in edges {
        if !used_a[i] && !used_g[j] {
            used_a[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Consumer-side matching state.
///
/// Locate aural tokens and zoom/capture gestures are released on arrival.
/// Pointing gestures and the remaining aural tokens pair greedily by capture
/// time. Explicit-describe and no-op aural tokens never wait: unpaired on
/// arrival means unpaired. Ambiguous describes wait until `capture + window`.
/// Unpaired pointing gestures wait until `capture + window + hold`.
#[derive(Debug, Clone)]
pub struct Matcher {
    policy: MatchPolicy,
    aural: Vec<AuralToken>,
    pointing: Vec<GestureToken>,
}

impl Matcher {
    pub fn new(policy: MatchPolicy) -> Self {
        Self { policy, aural: Vec::new(), pointing: Vec::new() }
    }

    /// Takes one arriving token; returns any bundle it produces by itself.
    pub fn accept(&mut self, envelope: TokenEnvelope, now: Timestamp) -> Option<MatchedBundle> {
        match envelope.payload {
            ModalityToken::Aural(a) if a.operation == AuralOperation::Locate => {
                Some(MatchedBundle::new(Some(a), None, now))
            }
            ModalityToken::Aural(a) => {
                self.aural.push(a);
                None
            }
            ModalityToken::Gesture(g) if g.label == GestureLabel::Pointing => {
                self.pointing.push(g);
                None
            }
            ModalityToken::Gesture(g) => Some(MatchedBundle::new(None, Some(g), now)),
        }
    }

    /// Pairs what can be paired at `now` and flushes what has expired.
    pub fn match_tokens(&mut self, now: Timestamp) -> Vec<MatchedBundle> {
        let a_times: Vec<Timestamp> = self.aural.iter().map(|a| a.t).collect();
        let g_times: Vec<Timestamp> = self.pointing.iter().map(|g| g.t).collect();
        let pairs = greedy_pairs(&a_times, &g_times, self.policy.window_ms);

        let mut out = Vec::new();
        let mut paired_a = vec![false; self.aural.len()];
        let mut paired_g = vec![false; self.pointing.len()];
        for (i, j) in pairs {
            paired_a[i] = true;
            paired_g[j] = true;
            out.push(MatchedBundle::new(Some(self.aural[i].clone()), Some(self.pointing[j].clone()), now));
        }

        let window = self.policy.window_ms;
        let hold = self.policy.pointing_hold_ms;
        let mut keep_a = Vec::new();
        for (a, paired) in std::mem::take(&mut self.aural).into_iter().zip(paired_a) {
            if paired {
                continue;
            }
            let waits = a.operation == AuralOperation::DescribeAmbiguous && now < a.t + window;
            if waits {
                keep_a.push(a);
            } else {
                out.push(MatchedBundle::new(Some(a), None, now));
            }
        }
        self.aural = keep_a;

        let mut keep_g = Vec::new();
        for (g, paired) in std::mem::take(&mut self.pointing).into_iter().zip(paired_g) {
            if paired {
                continue;
            }
            if now < g.t + (window + hold) {
                keep_g.push(g);
            } else {
                out.push(MatchedBundle::new(None, Some(g), now));
            }
        }
        self.pointing = keep_g;
        out
    }

    /// Earliest time a pending token will be flushed.
    pub fn next_deadline(&self) -> Option<Timestamp> {
        let window = self.policy.window_ms;
        let hold = self.policy.pointing_hold_ms;
        let a = self.aural.iter().map(|a| a.t + window);
        let g = self.pointing.iter().map(|g| g.t + (window + hold));
        a.chain(g).min()
    }

    pub fn pending(&self) -> usize {
        self.aural.len() + self.pointing.len()
    }
}

/// Orders envelopes as the consumer sees them: by arrival, then producer.
/// Stable, so each producer's own order is kept.
pub fn arrival_order(envelopes: &mut [TokenEnvelope]) {
    envelopes.sort_by(|a, b| a.enqueue_t.cmp(&b.enqueue_t).then(a.producer.cmp(&b.producer)));
}

/// Runs the matcher over a complete envelope list in virtual time.
/// Arrivals at an instant are taken before that instant's flushes.
pub fn match_stream(mut envelopes: Vec<TokenEnvelope>, policy: MatchPolicy) -> Vec<MatchedBundle> {
    arrival_order(&mut envelopes);
    let mut matcher = Matcher::new(policy);
    let mut out = Vec::new();
    let mut arrivals = envelopes.into_iter().peekable();
    loop {
        let next_arrival = arrivals.peek().map(|e| e.enqueue_t);
        let now = match (next_arrival, matcher.next_deadline()) {
            (Some(a), Some(d)) => a.min(d),
            (Some(a), None) => a,
            (None, Some(d)) => d,
            (None, None) => break,
        };
        while let Some(env) = arrivals.next_if(|e| e.enqueue_t <= now) {
            out.extend(matcher.accept(env, now));
        }
        out.extend(matcher.match_tokens(now));
    }
    out
}
