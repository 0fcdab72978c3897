use rand::Rng;

use super::{jittered, AsrProfile};
use crate::tracegen::Utterance;

#[derive(Debug, Clone, PartialEq)]
pub struct AsrOutput {
    /// One flag per utterance keyword.
    pub recognized: Vec<bool>,
    pub latency_ms: f64,
}

impl AsrOutput {
    /// Keywords that survived, in utterance order.
    pub fn surviving<'a>(&self, utterance: &'a Utterance) -> Vec<&'a str> {
        utterance
            .keywords
            .iter()
            .zip(&self.recognized)
            .filter(|(_, ok)| **ok)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Transcribes an utterance. Each keyword survives independently with the
/// profile's keyword recall; latency is transcription time plus network
/// round trip, jittered.
pub fn simulate_asr<R: Rng + ?Sized>(utterance: &Utterance, profile: &AsrProfile, rng: &mut R) -> AsrOutput {
    let latency_ms = jittered(profile.transcription_ms + profile.network_rtt_ms, profile.latency_jitter_ms, rng);
    let recognized = utterance.keywords.iter().map(|_| rng.gen::<f64>() < profile.keyword_recall).collect();
    AsrOutput { recognized, latency_ms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::EngineProfiles;
    use crate::lexicon::{ClassId, Multiplicity};
    use crate::seed::{Seed, Stream};
    use crate::tracegen::{keywords, Operation};
    use crate::types::Tier;

    fn utterance(text: &str) -> Utterance {
        Utterance {
            text: text.into(),
            operation: Operation::Locate,
            object: Some(ClassId::BOOK),
            target: Some(0),
            multiplicity: Multiplicity::Singular,
            deictic: false,
            keywords: keywords(text),
        }
    }

    fn still(tier: Tier) -> AsrProfile {
        let mut p = EngineProfiles::paper().asr.get(tier).clone();
        p.latency_jitter_ms = 0.0;
        p
    }

    #[test]
    fn zero_jitter_latencies() {
        let u = utterance("locate the book");
        let mut rng = Seed(1).rng(Stream::Asr, 0);
        assert_eq!(simulate_asr(&u, &still(Tier::H), &mut rng).latency_ms, 1500.0);
        let mut cloud = still(Tier::L);
        cloud.network_rtt_ms = 0.0;
        assert_eq!(simulate_asr(&u, &cloud, &mut rng).latency_ms, 2500.0);
        cloud.network_rtt_ms = 450.0;
        assert_eq!(simulate_asr(&u, &cloud, &mut rng).latency_ms, 2950.0);
    }

    #[test]
    fn keyword_survival_rate() {
        let u = utterance("show me where the book is");
        for tier in Tier::ALL {
            let p = still(tier);
            let mut rng = Seed(11).rng(Stream::Asr, tier as u64);
            let (mut kept, mut total) = (0usize, 0usize);
            for _ in 0..10_000 {
                let out = simulate_asr(&u, &p, &mut rng);
                kept += out.recognized.iter().filter(|b| **b).count();
                total += out.recognized.len();
            }
            let rate = kept as f64 / total as f64;
            assert!((rate - p.keyword_recall).abs() < 0.015, "{tier}: {rate}");
        }
    }

    #[test]
    fn surviving_keeps_order() {
        let u = utterance("show me where the book is");
        let out = AsrOutput { recognized: vec![true, false, true], latency_ms: 0.0 };
        assert_eq!(out.surviving(&u), vec!["show", "book"]);
    }
}
