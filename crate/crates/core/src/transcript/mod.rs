//! Speaker-tagged meeting transcripts.
//!
//! A [`Transcript`] is an ordered list of [`Utterance`]s with dense ids. Ids are
//! the stable key used by ground truth and detection results, so nothing
//! downstream merges or reorders utterances.

mod align;
mod canonical;
mod files;
mod resolve;
mod vtt;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align, align_with, split_sentences, AlignReport, Aligned, LongSegment};
pub use canonical::{parse_canonical, parse_long_segments, to_jsonl};
pub use files::{load_ground_truth, load_transcript, load_transcripts};
pub use resolve::{resolve_text, resolve_text_with, MatchKind, Resolution, DEFAULT_FUZZY_THRESHOLD};
pub use vtt::parse_vtt;

#[derive(Debug, Error, PartialEq)]
pub enum TranscriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("no cues")]
    NoCues,
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("utterance {id}: {reason}")]
    Invalid { id: usize, reason: String },
    #[error("start times are not monotone at utterance {id} ({start} < {previous})")]
    NonMonotone { id: usize, start: f64, previous: f64 },
    #[error("alignment needs at least one short fragment")]
    EmptySkeleton,
    #[error("ground truth for team {team}: {reason}")]
    GroundTruth { team: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<TranscriptError>,
    },
}

/// One speaker turn. `start`/`end` are seconds from meeting start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: usize,
    pub speaker: String,
    pub start: f64,
    pub end: f64,
    pub text: String,
}

impl Utterance {
    /// `Speaker: text`, the form quoted back by the model and used for token accounting.
    pub fn rendered(&self) -> String {
        let text = self.text.replace(['\n', '\r'], " ");
        format!("{}: {}", self.speaker, text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub team_id: String,
    utterances: Vec<Utterance>,
}

impl Transcript {
    /// Builds a transcript, re-assigning dense ids in the given order.
    ///
    /// Rejects negative or inverted times, empty speakers, and start times that
    /// go backwards. Text may be empty only for aligned fragments that received
    /// no long-form content.
    pub fn new(team_id: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self, TranscriptError> {
        let mut out = Vec::with_capacity(utterances.len());
        let mut previous = f64::NEG_INFINITY;
        for (id, mut u) in utterances.into_iter().enumerate() {
            u.id = id;
            validate(&u)?;
            if u.start < previous {
                return Err(TranscriptError::NonMonotone {
                    id,
                    start: u.start,
                    previous,
                });
            }
            previous = u.start;
            out.push(u);
        }
        Ok(Self {
            team_id: team_id.into(),
            utterances: out,
        })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn get(&self, id: usize) -> Option<&Utterance> {
        self.utterances.get(id)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.utterances.iter().map(|u| u.end).fold(0.0, f64::max)
    }
}

fn validate(u: &Utterance) -> Result<(), TranscriptError> {
    let invalid = |reason: &str| TranscriptError::Invalid {
        id: u.id,
        reason: reason.to_string(),
    };
    if u.speaker.trim().is_empty() {
        return Err(invalid("empty speaker"));
    }
    if !u.start.is_finite() || !u.end.is_finite() {
        return Err(invalid("non-finite timestamp"));
    }
    if u.start < 0.0 {
        return Err(invalid("negative start"));
    }
    if u.end < u.start {
        return Err(invalid("end before start"));
    }
    Ok(())
}

/// Annotation for one milestone of one team.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneTruth {
    pub achieved: bool,
    #[serde(default)]
    pub valid_utterance_ids: BTreeSet<usize>,
}

/// Per-team ground truth: which milestones were achieved and which utterances
/// state each one correctly (first statement or any restatement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub team_id: String,
    pub milestones: BTreeMap<String, MilestoneTruth>,
}

impl GroundTruth {
    pub fn from_json(text: &str) -> Result<Self, TranscriptError> {
        let gt: GroundTruth = serde_json::from_str(text).map_err(|e| TranscriptError::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        gt.check_consistency()?;
        Ok(gt)
    }

    pub fn milestone(&self, name: &str) -> Option<&MilestoneTruth> {
        self.milestones.get(name)
    }

    pub fn achieved_count<'a>(truths: impl IntoIterator<Item = &'a GroundTruth>, name: &str) -> usize {
        truths
            .into_iter()
            .filter(|gt| gt.milestone(name).is_some_and(|m| m.achieved))
            .count()
    }

    /// achieved ⇔ valid ids non-empty.
    pub fn check_consistency(&self) -> Result<(), TranscriptError> {
        for (name, m) in &self.milestones {
            if m.achieved == m.valid_utterance_ids.is_empty() {
                return Err(TranscriptError::GroundTruth {
                    team: self.team_id.clone(),
                    reason: format!(
                        "milestone `{name}`: achieved={} but {} valid ids",
                        m.achieved,
                        m.valid_utterance_ids.len()
                    ),
                });
            }
        }
        Ok(())
    }

    /// Every valid id must exist in the team's transcript.
    pub fn check_against(&self, transcript: &Transcript) -> Result<(), TranscriptError> {
        self.check_consistency()?;
        for (name, m) in &self.milestones {
            if let Some(bad) = m.valid_utterance_ids.iter().find(|&&id| id >= transcript.len()) {
                return Err(TranscriptError::GroundTruth {
                    team: self.team_id.clone(),
                    reason: format!(
                        "milestone `{name}` references utterance {bad}, transcript has {}",
                        transcript.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(speaker: &str, start: f64, end: f64, text: &str) -> Utterance {
        Utterance {
            id: 0,
            speaker: speaker.into(),
            start,
            end,
            text: text.into(),
        }
    }

    #[test]
    fn ids_are_reassigned_densely() {
        let t = Transcript::new("T", vec![utt("A", 0.0, 1.0, "x"), utt("B", 1.0, 2.0, "y")]).unwrap();
        let ids: Vec<_> = t.utterances().iter().map(|u| u.id).collect();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn rejects_inverted_interval() {
        let err = Transcript::new("T", vec![utt("A", 2.0, 1.0, "x")]).unwrap_err();
        assert!(matches!(err, TranscriptError::Invalid { id: 0, .. }));
    }

    #[test]
    fn rejects_backwards_start() {
        let err = Transcript::new("T", vec![utt("A", 5.0, 6.0, "x"), utt("B", 1.0, 2.0, "y")]).unwrap_err();
        assert!(matches!(err, TranscriptError::NonMonotone { id: 1, .. }));
    }

    #[test]
    fn equal_starts_are_allowed() {
        assert!(Transcript::new("T", vec![utt("A", 1.0, 2.0, "x"), utt("B", 1.0, 1.5, "y")]).is_ok());
    }

    #[test]
    fn ground_truth_consistency() {
        let ok = r#"{"team_id":"T1","milestones":{"one":{"achieved":true,"valid_utterance_ids":[1]},"hex":{"achieved":false,"valid_utterance_ids":[]}}}"#;
        let gt = GroundTruth::from_json(ok).unwrap();
        assert!(gt.milestone("one").unwrap().achieved);

        let bad = r#"{"team_id":"T1","milestones":{"one":{"achieved":true,"valid_utterance_ids":[]}}}"#;
        assert!(GroundTruth::from_json(bad).is_err());

        let t = Transcript::new("T1", vec![utt("A", 0.0, 1.0, "x")]).unwrap();
        assert!(gt.check_against(&t).is_err());
    }
}
