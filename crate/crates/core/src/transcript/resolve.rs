//! Mapping free-text sentences returned by a model back onto utterances.

use serde::{Deserialize, Serialize};

use super::{Transcript, Utterance};
use crate::text::{edit_ratio, normalize};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Normalized,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution<'t> {
    pub utterance: &'t Utterance,
    pub kind: MatchKind,
    pub similarity: f64,
}

pub fn resolve_text<'t>(transcript: &'t Transcript, candidate: &str) -> Option<Resolution<'t>> {
    resolve_text_with(transcript, candidate, DEFAULT_FUZZY_THRESHOLD)
}

/// Exact text match first, then normalized equality, then the best
/// normalized edit ratio at or above `threshold`. Earliest utterance wins ties.
pub fn resolve_text_with<'t>(transcript: &'t Transcript, candidate: &str, threshold: f64) -> Option<Resolution<'t>> {
    if candidate.trim().is_empty() {
        return None;
    }
    let utterances = transcript.utterances();
    if let Some(u) = utterances.iter().find(|u| u.text == candidate) {
        return Some(Resolution {
            utterance: u,
            kind: MatchKind::Exact,
            similarity: 1.0,
        });
    }

    let wanted = normalize(candidate);
    if wanted.is_empty() {
        return None;
    }
    let normalized: Vec<String> = utterances.iter().map(|u| normalize(&u.text)).collect();
    if let Some(i) = normalized.iter().position(|n| *n == wanted) {
        return Some(Resolution {
            utterance: &utterances[i],
            kind: MatchKind::Normalized,
            similarity: 1.0,
        });
    }

    let mut best: Option<(usize, f64)> = None;
    for (i, n) in normalized.iter().enumerate() {
        let ratio = edit_ratio(&wanted, n);
        if best.is_none_or(|(_, r)| ratio > r) {
            best = Some((i, ratio));
        }
    }
    match best {
        Some((i, ratio)) if ratio >= threshold => Some(Resolution {
            utterance: &utterances[i],
            kind: MatchKind::Fuzzy,
            similarity: ratio,
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::Utterance;
    use proptest::prelude::*;

    fn transcript(texts: &[&str]) -> Transcript {
        let utterances = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance {
                id: i,
                speaker: "Alice".into(),
                start: i as f64,
                end: i as f64 + 1.0,
                text: t.to_string(),
            })
            .collect();
        Transcript::new("T", utterances).unwrap()
    }

    #[test]
    fn exact_match() {
        let texts: Vec<String> = (0..10).map(|i| format!("sentence number {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let t = transcript(&refs);
        let r = resolve_text(&t, "sentence number 7").unwrap();
        assert_eq!((r.utterance.id, r.kind), (7, MatchKind::Exact));
    }

    #[test]
    fn normalized_match_strips_speaker_and_punctuation() {
        let t = transcript(&["what about hex", "no red gems"]);
        let r = resolve_text(&t, "Alice: No red gems!").unwrap();
        assert_eq!((r.utterance.id, r.kind), (1, MatchKind::Normalized));
    }

    #[test]
    fn fuzzy_match_tolerates_keyword_slip() {
        let t = transcript(&["hello there", "the octopus curse means no gems are touching each other"]);
        let r = resolve_text(&t, "the octopus curse means no jams are touching each other").unwrap();
        assert_eq!((r.utterance.id, r.kind), (1, MatchKind::Fuzzy));
        assert!(r.similarity >= DEFAULT_FUZZY_THRESHOLD);
    }

    #[test]
    fn unrelated_candidate_is_unresolved() {
        let t = transcript(&["no red gems", "look at chest four"]);
        assert!(resolve_text(&t, "pirate is more large than small").is_none());
        assert!(resolve_text(&t, "   ").is_none());
    }

    #[test]
    fn earliest_wins_ties() {
        let t = transcript(&["abc", "no red gems", "No red gems."]);
        assert_eq!(resolve_text(&t, "no red gems!").unwrap().utterance.id, 1);
        let t = transcript(&["no red gemz", "no red gemx"]);
        assert_eq!(resolve_text(&t, "no red gems").unwrap().utterance.id, 0);
    }

    proptest! {
        #[test]
        fn every_utterance_resolves_to_itself(texts in prop::collection::vec("[a-z ]{1,20}[a-z]", 1..15)) {
            let mut seen = std::collections::HashSet::new();
            let unique: Vec<&str> = texts.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect();
            let t = transcript(&unique);
            for u in t.utterances() {
                let r = resolve_text(&t, &u.text).unwrap();
                prop_assert_eq!(r.utterance.id, u.id);
                prop_assert_eq!(r.kind, MatchKind::Exact);
            }
        }
    }
}
