use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{jittered, AsrProfile, ClassifierProfile};
use crate::engines::simulate_asr;
use crate::lexicon::{lexicon_lookup, ClassId, Multiplicity};
use crate::seed::{Seed, Stream};
use crate::tracegen::{Operation, Utterance};
use crate::types::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuralOperation {
    Locate,
    DescribeExplicit,
    DescribeAmbiguous,
    NoOp,
}

impl AuralOperation {
    pub fn is_describe(self) -> bool {
        matches!(self, AuralOperation::DescribeExplicit | AuralOperation::DescribeAmbiguous)
    }
}

/// Output of the aural pipeline (ASR then TC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuralToken {
    pub interaction: u32,
    pub operation: AuralOperation,
    pub object: Option<ClassId>,
    pub multiplicity: Multiplicity,
    /// Capture time: start of the utterance.
    pub t: Timestamp,
    pub asr_ms: f64,
    pub tc_ms: f64,
}

impl AuralToken {
    /// When the token reaches the queue.
    pub fn ready(&self) -> Timestamp {
        self.t + (self.asr_ms + self.tc_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextLabel {
    pub operation: AuralOperation,
    pub object: Option<ClassId>,
    pub multiplicity: Multiplicity,
    pub latency_ms: f64,
}

const LOCATE_CUES: &[&str] = &["locate", "where", "find"];
const DESCRIBE_CUES: &[&str] = &["describe", "details", "tell", "what", "this"];

#[derive(Clone, Copy, PartialEq)]
enum Label {
    Locate,
    Describe,
    NoOp,
}

const LABELS: [Label; 3] = [Label::Locate, Label::Describe, Label::NoOp];

fn pick(u: f64, from: &[Label]) -> Label {
    from[((u * from.len() as f64) as usize).min(from.len() - 1)]
}

/// Labels a transcript.
///
/// With a cue word for the intended operation present, the label is right
/// with probability `label_accuracy` and otherwise uniform over the other two
/// labels. With no cue left the label is a uniform guess. A missing object
/// word turns any command into `no_op`; a describe becomes ambiguous when
/// "this" survived.
pub fn classify_text<S: AsRef<str>, R: Rng + ?Sized>(
    surviving: &[S],
    intended: Operation,
    profile: &ClassifierProfile,
    rng: &mut R,
) -> TextLabel {
    let latency_ms = jittered(profile.latency_ms, profile.latency_jitter_ms, rng);
    let u_label: f64 = rng.gen();
    let u_confuse: f64 = rng.gen();

    let words: Vec<&str> = surviving.iter().map(|s| s.as_ref()).collect();
    let truth = match intended {
        Operation::Locate => Label::Locate,
        Operation::Describe => Label::Describe,
        Operation::NoOp => Label::NoOp,
    };
    let cues: &[&str] = match truth {
        Label::Locate => LOCATE_CUES,
        Label::Describe => DESCRIBE_CUES,
        Label::NoOp => &[],
    };
    let cued = truth == Label::NoOp || words.iter().any(|w| cues.contains(w));
    let label = if !cued {
        pick(u_confuse, &LABELS)
    } else if u_label < profile.label_accuracy {
        truth
    } else {
        let others: Vec<Label> = LABELS.iter().copied().filter(|l| *l != truth).collect();
        pick(u_confuse, &others)
    };

    let found = lexicon_lookup(&words);
    let (operation, object, multiplicity) = match (label, found) {
        (Label::NoOp, _) | (_, None) => (AuralOperation::NoOp, None, Multiplicity::Singular),
        (Label::Locate, Some((id, m))) => (AuralOperation::Locate, Some(id), m),
        (Label::Describe, Some((id, m))) => {
            let op = if words.contains(&"this") {
                AuralOperation::DescribeAmbiguous
            } else {
                AuralOperation::DescribeExplicit
            };
            (op, Some(id), m)
        }
    };
    TextLabel { operation, object, multiplicity, latency_ms }
}

/// Runs ASR then TC for one utterance on the interaction's own sub-streams.
pub fn aural_token(
    utterance: &Utterance,
    t: Timestamp,
    interaction: u32,
    asr: &AsrProfile,
    tc: &ClassifierProfile,
    seed: Seed,
) -> AuralToken {
    let mut asr_rng = seed.rng(Stream::Asr, interaction as u64);
    let transcript = simulate_asr(utterance, asr, &mut asr_rng);
    let mut tc_rng = seed.rng(Stream::Tc, interaction as u64);
    let label = classify_text(&transcript.surviving(utterance), utterance.operation, tc, &mut tc_rng);
    AuralToken {
        interaction,
        operation: label.operation,
        object: label.object,
        multiplicity: label.multiplicity,
        t,
        asr_ms: transcript.latency_ms,
        tc_ms: label.latency_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::EngineProfiles;
    use crate::tracegen::keywords;
    use crate::types::Tier;

    fn perfect(tier: Tier) -> ClassifierProfile {
        let mut p = EngineProfiles::paper().tc.get(tier).clone();
        p.label_accuracy = 1.0;
        p.latency_jitter_ms = 0.0;
        p
    }

    fn broken() -> ClassifierProfile {
        let mut p = perfect(Tier::L);
        p.label_accuracy = 0.0;
        p
    }

    #[test]
    fn details_of_the_book() {
        let kw = keywords("show me the details of the book");
        let mut rng = Seed(1).rng(Stream::Tc, 0);
        let out = classify_text(&kw, Operation::Describe, &perfect(Tier::H), &mut rng);
        assert_eq!(out.operation, AuralOperation::DescribeExplicit);
        assert_eq!(out.object, Some(ClassId::BOOK));
        assert_eq!(out.latency_ms, 95.0);
    }

    #[test]
    fn what_is_this_book_is_ambiguous() {
        let kw = keywords("what is this book");
        let mut rng = Seed(1).rng(Stream::Tc, 0);
        let out = classify_text(&kw, Operation::Describe, &perfect(Tier::H), &mut rng);
        assert_eq!(out.operation, AuralOperation::DescribeAmbiguous);
        assert_eq!(out.multiplicity, Multiplicity::Singular);
    }

    #[test]
    fn failed_draw_mislabels() {
        let kw = keywords("show me the details of the book");
        let mut rng = Seed(2).rng(Stream::Tc, 0);
        let mut seen_locate = false;
        for _ in 0..64 {
            let out = classify_text(&kw, Operation::Describe, &broken(), &mut rng);
            assert!(!out.operation.is_describe());
            seen_locate |= out.operation == AuralOperation::Locate;
        }
        assert!(seen_locate);
    }

    #[test]
    fn missing_object_is_noop() {
        let mut rng = Seed(3).rng(Stream::Tc, 0);
        let out = classify_text(&["locate"], Operation::Locate, &perfect(Tier::H), &mut rng);
        assert_eq!(out.operation, AuralOperation::NoOp);
        assert_eq!(out.object, None);
    }

    #[test]
    fn label_rate_matches_accuracy() {
        let kw = keywords("locate the cup");
        for tier in Tier::ALL {
            let mut p = perfect(tier);
            p.label_accuracy = EngineProfiles::paper().tc.get(tier).label_accuracy;
            let mut rng = Seed(5).rng(Stream::Tc, tier as u64);
            let hits = (0..10_000)
                .filter(|_| classify_text(&kw, Operation::Locate, &p, &mut rng).operation == AuralOperation::Locate)
                .count();
            let rate = hits as f64 / 10_000.0;
            assert!((rate - p.label_accuracy).abs() < 0.015, "{tier}: {rate}");
        }
    }

    #[test]
    fn uncued_transcript_guesses_uniformly() {
        let mut rng = Seed(6).rng(Stream::Tc, 0);
        let hits = (0..10_000)
            .filter(|_| {
                classify_text(&["book"], Operation::Locate, &perfect(Tier::H), &mut rng).operation
                    == AuralOperation::Locate
            })
            .count();
        assert!((hits as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.015);
    }
}
