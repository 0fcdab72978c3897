//! Matching against an exhaustive oracle, token conservation, and
//! equivalence of the threaded and virtual-time paths.

use mrfuse::engines::{AuralOperation, AuralToken, GestureToken};
use mrfuse::lexicon::{ClassId, Multiplicity};
use mrfuse::syncq::{greedy_pairs, match_live, match_stream, MatchPolicy, MatchedBundle, Matcher, TokenEnvelope};
use mrfuse::tracegen::GestureLabel;
use mrfuse::types::{Point, Timestamp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WINDOW: f64 = 2000.0;

type Key = (f64, usize, usize);

/// All matchings that cannot be extended, by recursion over aural tokens.
fn maximal_matchings(edges: &[Key], n_a: usize, n_g: usize) -> Vec<Vec<Key>> {
    fn go(i: usize, edges: &[Key], n_a: usize, used_g: &mut Vec<bool>, cur: &mut Vec<Key>, out: &mut Vec<Vec<Key>>) {
        if i == n_a {
            out.push(cur.clone());
            return;
        }
        for e in edges.iter().filter(|e| e.1 == i) {
            if !used_g[e.2] {
                used_g[e.2] = true;
                cur.push(*e);
                go(i + 1, edges, n_a, used_g, cur, out);
                cur.pop();
                used_g[e.2] = false;
            }
        }
        go(i + 1, edges, n_a, used_g, cur, out);
    }
    let mut all = Vec::new();
    go(0, edges, n_a, &mut vec![false; n_g], &mut Vec::new(), &mut all);
    all.retain(|m| {
        let used_a: Vec<usize> = m.iter().map(|e| e.1).collect();
        let used_g: Vec<usize> = m.iter().map(|e| e.2).collect();
        !edges.iter().any(|e| !used_a.contains(&e.1) && !used_g.contains(&e.2))
    });
    all
}

/// The matching whose gaps, sorted ascending with index tie-breaks, are
/// lexicographically smallest.
fn oracle(aural: &[f64], gestures: &[f64], window: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, a) in aural.iter().enumerate() {
        for (j, g) in gestures.iter().enumerate() {
            if (a - g).abs() <= window {
                edges.push(((a - g).abs(), i, j));
            }
        }
    }
    let cmp = |x: &Key, y: &Key| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2));
    let mut best: Option<Vec<Key>> = None;
    for mut m in maximal_matchings(&edges, aural.len(), gestures.len()) {
        m.sort_by(cmp);
        let better = match &best {
            None => true,
            Some(b) => {
                let ord = m.iter().zip(b).map(|(x, y)| cmp(x, y)).find(|o| o.is_ne());
                ord.map_or(m.len() > b.len(), |o| o.is_lt())
            }
        };
        if better {
            best = Some(m);
        }
    }
    let mut pairs: Vec<(usize, usize)> = best.unwrap_or_default().iter().map(|e| (e.1, e.2)).collect();
    pairs.sort();
    pairs
}

fn aural(interaction: u32, op: AuralOperation, t: f64, latency: f64) -> AuralToken {
    AuralToken {
        interaction,
        operation: op,
        object: Some(ClassId::BOOK),
        multiplicity: Multiplicity::Singular,
        t: Timestamp::from_ms(t),
        asr_ms: latency,
        tc_ms: 0.0,
    }
}

fn gesture(interaction: u32, label: GestureLabel, t: f64, latency: f64) -> GestureToken {
    GestureToken {
        interaction,
        label,
        hand: (label == GestureLabel::Pointing).then_some(Point::new(0.5, 0.5)),
        t: Timestamp::from_ms(t),
        gr_ms: latency,
    }
}

/// Capture times on a 50 ms grid so ties and exact window edges occur.
fn random_times(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0..120) as f64 * 50.0).collect()
}

#[test]
fn greedy_equals_exhaustive_oracle() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let policy = MatchPolicy { window_ms: WINDOW, pointing_hold_ms: 4000.0 };
    for _ in 0..1000 {
        let total = rng.gen_range(1..=10);
        let n_a = rng.gen_range(0..=total);
        let a = random_times(&mut rng, n_a);
        let g = random_times(&mut rng, total - n_a);

        let mut greedy = greedy_pairs(
            &a.iter().map(|t| Timestamp::from_ms(*t)).collect::<Vec<_>>(),
            &g.iter().map(|t| Timestamp::from_ms(*t)).collect::<Vec<_>>(),
            WINDOW,
        );
        greedy.sort();
        assert_eq!(greedy, oracle(&a, &g, WINDOW), "aural {a:?} gestures {g:?}");

        // The stateful matcher, given every token before matching, agrees.
        let mut m = Matcher::new(policy);
        for (i, t) in a.iter().enumerate() {
            let tok = aural(i as u32, AuralOperation::DescribeAmbiguous, *t, 0.0);
            assert!(m.accept(TokenEnvelope::aural(tok), Timestamp::from_ms(*t)).is_none());
        }
        for (j, t) in g.iter().enumerate() {
            let tok = gesture(100 + j as u32, GestureLabel::Pointing, *t, 0.0);
            assert!(m.accept(TokenEnvelope::gesture(tok), Timestamp::from_ms(*t)).is_none());
        }
        let bundles = m.match_tokens(Timestamp::from_ms(100_000.0));
        let mut pairs: Vec<(usize, usize)> = bundles
            .iter()
            .filter_map(|b| Some((b.aural.as_ref()?.interaction as usize, b.gesture.as_ref()?.interaction as usize - 100)))
            .collect();
        pairs.sort();
        assert_eq!(pairs, oracle(&a, &g, WINDOW));
        assert_eq!(bundles.len(), a.len() + g.len() - pairs.len(), "every token used exactly once");
        assert_eq!(m.pending(), 0);
    }
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn oracle_sanity() {
    // 0 -- 1500 -- 2500: greedy takes the 1000 ms gap, leaving 0 unpaired.
    assert_eq!(oracle(&[1500.0], &[0.0, 2500.0], WINDOW), vec![(0, 1)]);
    assert_eq!(oracle(&[0.0, 3000.0], &[1500.0], WINDOW), vec![(0, 0)]);
    assert!(oracle(&[0.0], &[2000.1], WINDOW).is_empty());
    assert_eq!(oracle(&[0.0], &[2000.0], WINDOW), vec![(0, 0)]);
}

#[derive(Debug, Clone)]
enum Tok {
    A(AuralToken),
    G(GestureToken),
}

fn random_stream(rng: &mut ChaCha8Rng, n: usize) -> Vec<Tok> {
    let ops = [
        AuralOperation::Locate,
        AuralOperation::DescribeExplicit,
        AuralOperation::DescribeAmbiguous,
        AuralOperation::NoOp,
    ];
    (0..n as u32)
        .map(|k| {
            let t = rng.gen_range(0..200) as f64 * 50.0;
            if rng.gen_bool(0.5) {
                Tok::A(aural(k, ops[rng.gen_range(0..4)], t, rng.gen_range(0.0..3500.0)))
            } else {
                Tok::G(gesture(k, GestureLabel::ALL[rng.gen_range(0..4)], t, rng.gen_range(0.0..400.0)))
            }
        })
        .collect()
}

fn envelopes(stream: &[Tok]) -> (Vec<TokenEnvelope>, Vec<TokenEnvelope>) {
    let mut a: Vec<TokenEnvelope> = Vec::new();
    let mut g: Vec<TokenEnvelope> = Vec::new();
    for t in stream {
        match t {
            Tok::A(x) => a.push(TokenEnvelope::aural(x.clone())),
            Tok::G(x) => g.push(TokenEnvelope::gesture(x.clone())),
        }
    }
    // Each producer emits in arrival order.
    a.sort_by_key(|e| e.enqueue_t);
    g.sort_by_key(|e| e.enqueue_t);
    (a, g)
}

fn check_bundles(stream: &[Tok], bundles: &[MatchedBundle], policy: MatchPolicy) {
    let mut seen = vec![0usize; stream.len()];
    for b in bundles {
        if let Some(a) = &b.aural {
            seen[a.interaction as usize] += 1;
            let arrival = a.ready();
            assert!(b.emitted_at >= arrival);
            // Liveness: never held past the later of arrival and window end.
            assert!(b.emitted_at <= arrival.max(a.t + policy.window_ms), "{b:?}");
            if a.operation == AuralOperation::Locate {
                assert!(b.gesture.is_none());
            }
        }
        if let Some(g) = &b.gesture {
            seen[g.interaction as usize] += 1;
            assert!(b.emitted_at >= g.t + g.gr_ms);
            if g.label == GestureLabel::Pointing {
                assert!(b.emitted_at <= (g.t + g.gr_ms).max(g.t + (policy.window_ms + policy.pointing_hold_ms)));
            } else {
                assert!(b.aural.is_none());
            }
        }
        if let (Some(a), Some(g)) = (&b.aural, &b.gesture) {
            assert!((a.t - g.t).abs() <= policy.window_ms);
            assert_eq!(g.label, GestureLabel::Pointing);
        }
    }
    assert!(seen.iter().all(|c| *c == 1), "lost or reused tokens: {seen:?}");
}

#[test]
fn streams_conserve_tokens_and_respect_deadlines() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let policy = MatchPolicy { window_ms: WINDOW, pointing_hold_ms: 4000.0 };
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let stream = random_stream(&mut rng, n);
        let (mut a, g) = envelopes(&stream);
        a.extend(g);
        let bundles = match_stream(a, policy);
        check_bundles(&stream, &bundles, policy);
        let emitted: Vec<Timestamp> = bundles.iter().map(|b| b.emitted_at).collect();
        assert!(emitted.windows(2).all(|w| w[0] <= w[1]), "bundles leave in time order");
    }
}

#[test]
fn live_matches_virtual() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = MatchPolicy { window_ms: WINDOW, pointing_hold_ms: 4000.0 };
    for round in 0..100 {
        let stream = random_stream(&mut rng, 10);
        let (a, g) = envelopes(&stream);
        let mut all = a.clone();
        all.extend(g.clone());
        let virtual_ = match_stream(all, policy);
        let capacity = 1 + round % 3;
        let live = match_live(vec![a, g], capacity, policy).expect("consumer keeps up");
        assert_eq!(live, virtual_);
    }
}

proptest! {
    #[test]
    fn matching_is_order_insensitive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = MatchPolicy { window_ms: WINDOW, pointing_hold_ms: 4000.0 };
        let stream = random_stream(&mut rng, 8);
        let (a, g) = envelopes(&stream);
        let mut forward = a.clone();
        forward.extend(g.clone());
        let mut backward = g;
        backward.extend(a);
        prop_assert_eq!(match_stream(forward, policy), match_stream(backward, policy));
    }

    #[test]
    fn pairs_are_within_window(
        a in prop::collection::vec(0u32..10_000, 0..6),
        g in prop::collection::vec(0u32..10_000, 0..6),
        window in 0u32..3000,
    ) {
        let ts = |v: &[u32]| v.iter().map(|x| Timestamp::from_ms(*x as f64)).collect::<Vec<_>>();
        let pairs = greedy_pairs(&ts(&a), &ts(&g), window as f64);
        let mut used_a = std::collections::HashSet::new();
        let mut used_g = std::collections::HashSet::new();
        for (i, j) in pairs {
            prop_assert!((a[i] as f64 - g[j] as f64).abs() <= window as f64);
            prop_assert!(used_a.insert(i) && used_g.insert(j));
        }
    }
}
