//! Time alignment of long-form monologues onto a short-fragment skeleton.
//!
//! Each long segment is split into sentence pieces. Piece intervals are
//! interpolated across the segment proportionally to character length, and
//! every piece goes to the short fragment it overlaps most (earlier fragment on
//! ties). The output keeps the short skeleton's timing and speakers.

use serde::{Deserialize, Serialize};

use super::{Transcript, TranscriptError, Utterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongSegment {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AlignReport {
    /// Pieces whose long-form speaker differs from the fragment they landed on.
    pub speaker_discrepancies: usize,
    pub pieces: usize,
    /// Fragments that received no piece and therefore have empty text.
    pub empty_fragments: Vec<usize>,
    /// Set when there was no long-form content and the skeleton passed through.
    pub long_was_empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub transcript: Transcript,
    pub report: AlignReport,
}

/// Splits at `.`, `!` or `?` followed by whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut begin = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if boundary {
                let cut = i + c.len_utf8();
                pieces.push(&text[begin..cut]);
                begin = cut;
            }
        }
    }
    pieces.push(&text[begin..]);
    pieces.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

pub fn align(long: &[LongSegment], short: &Transcript) -> Result<Aligned, TranscriptError> {
    align_with(long, short, split_sentences)
}

pub fn align_with<F>(long: &[LongSegment], short: &Transcript, splitter: F) -> Result<Aligned, TranscriptError>
where
    F: for<'a> Fn(&'a str) -> Vec<&'a str>,
{
    let fragments = short.utterances();
    if fragments.is_empty() {
        return Err(TranscriptError::EmptySkeleton);
    }
    if long.is_empty() {
        log::warn!(
            "no long-form content for team {}; skeleton passed through",
            short.team_id
        );
        return Ok(Aligned {
            transcript: short.clone(),
            report: AlignReport {
                long_was_empty: true,
                ..AlignReport::default()
            },
        });
    }

    let mut assigned: Vec<Vec<&str>> = vec![Vec::new(); fragments.len()];
    let mut report = AlignReport::default();

    for segment in long {
        let pieces = splitter(&segment.text);
        let lengths: Vec<usize> = pieces.iter().map(|p| p.chars().count()).collect();
        let total: usize = lengths.iter().sum();
        let duration = segment.end - segment.start;
        let mut consumed = 0usize;
        for (piece, len) in pieces.iter().zip(&lengths) {
            let (from, to) = if total == 0 {
                (segment.start, segment.end)
            } else {
                let from = segment.start + duration * consumed as f64 / total as f64;
                consumed += len;
                let to = segment.start + duration * consumed as f64 / total as f64;
                (from, to)
            };
            let target = best_fragment(fragments, from, to);
            if fragments[target].speaker != segment.speaker {
                report.speaker_discrepancies += 1;
            }
            assigned[target].push(piece);
            report.pieces += 1;
        }
    }

    let utterances = fragments
        .iter()
        .zip(assigned)
        .map(|(frag, pieces)| {
            if pieces.is_empty() {
                report.empty_fragments.push(frag.id);
            }
            Utterance {
                text: pieces.join(" "),
                ..frag.clone()
            }
        })
        .collect();

    Ok(Aligned {
        transcript: Transcript::new(short.team_id.clone(), utterances)?,
        report,
    })
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

fn gap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (b0 - a1).max(a0 - b1).max(0.0)
}

/// Maximal overlap, earliest on ties. Pieces that touch no fragment (zero
/// length, or falling in a silence) go to the nearest fragment instead.
fn best_fragment(fragments: &[Utterance], from: f64, to: f64) -> usize {
    let mut best = 0;
    let mut best_overlap = 0.0;
    for (i, f) in fragments.iter().enumerate() {
        let o = overlap(from, to, f.start, f.end);
        if o > best_overlap {
            best_overlap = o;
            best = i;
        }
    }
    if best_overlap > 0.0 {
        return best;
    }
    let mut best_gap = f64::INFINITY;
    for (i, f) in fragments.iter().enumerate() {
        let g = gap(from, to, f.start, f.end);
        if g < best_gap {
            best_gap = g;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frag(speaker: &str, start: f64, end: f64, text: &str) -> Utterance {
        Utterance {
            id: 0,
            speaker: speaker.into(),
            start,
            end,
            text: text.into(),
        }
    }

    fn seg(speaker: &str, start: f64, end: f64, text: &str) -> LongSegment {
        LongSegment {
            speaker: speaker.into(),
            start,
            end,
            text: text.into(),
        }
    }

    fn texts(a: &Aligned) -> Vec<&str> {
        a.transcript.utterances().iter().map(|u| u.text.as_str()).collect()
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        assert_eq!(split_sentences("A. B."), vec!["A.", "B."]);
        assert_eq!(
            split_sentences("Wait?! No 3.5 gems. ok"),
            vec!["Wait?!", "No 3.5 gems.", "ok"]
        );
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn two_sentences_over_two_fragments() {
        // Exhaustive overlap for this case: piece "A." spans [0,5], "B." spans [5,10].
        // Overlaps: A -> (5, 0), B -> (0, 5). So A goes to fragment 0, B to fragment 1.
        let short = Transcript::new("T", vec![frag("S", 0.0, 5.0, "a"), frag("S", 5.0, 10.0, "b")]).unwrap();
        let out = align(&[seg("S", 0.0, 10.0, "A. B.")], &short).unwrap();
        assert_eq!(texts(&out), vec!["A.", "B."]);
    }

    #[test]
    fn identical_structure_is_identity() {
        let short = Transcript::new(
            "T",
            vec![
                frag("A", 0.0, 2.0, "no red gems."),
                frag("B", 2.0, 5.0, "octopus means no touching."),
            ],
        )
        .unwrap();
        let long: Vec<_> = short
            .utterances()
            .iter()
            .map(|u| seg(&u.speaker, u.start, u.end, &u.text))
            .collect();
        let out = align(&long, &short).unwrap();
        assert_eq!(texts(&out), vec!["no red gems.", "octopus means no touching."]);
        assert_eq!(out.report.speaker_discrepancies, 0);
    }

    #[test]
    fn majority_overlap_wins() {
        // Single piece over [0,10]; fragment 0 covers 4 s of it, fragment 1 covers 6 s.
        let short = Transcript::new("T", vec![frag("S", 0.0, 4.0, "x"), frag("S", 4.0, 12.0, "y")]).unwrap();
        let out = align(&[seg("S", 0.0, 10.0, "one piece only")], &short).unwrap();
        assert_eq!(texts(&out), vec!["", "one piece only"]);
        assert_eq!(out.report.empty_fragments, vec![0]);
    }

    #[test]
    fn equal_overlap_goes_to_earlier() {
        let short = Transcript::new("T", vec![frag("S", 0.0, 5.0, "x"), frag("S", 5.0, 10.0, "y")]).unwrap();
        let out = align(&[seg("S", 2.5, 7.5, "tie")], &short).unwrap();
        assert_eq!(texts(&out), vec!["tie", ""]);
    }

    #[test]
    fn speaker_disagreement_keeps_skeleton() {
        let short = Transcript::new("T", vec![frag("Zoom-A", 0.0, 5.0, "x")]).unwrap();
        let out = align(&[seg("Rev-A", 0.0, 5.0, "Hi. There.")], &short).unwrap();
        assert_eq!(out.transcript.utterances()[0].speaker, "Zoom-A");
        assert_eq!(out.report.speaker_discrepancies, 2);
    }

    #[test]
    fn piece_in_silence_goes_to_nearest() {
        let short = Transcript::new("T", vec![frag("S", 0.0, 1.0, "x"), frag("S", 10.0, 11.0, "y")]).unwrap();
        let out = align(&[seg("S", 8.0, 9.0, "late")], &short).unwrap();
        assert_eq!(texts(&out), vec!["", "late"]);
    }

    #[test]
    fn empty_short_errors_and_empty_long_passes_through() {
        let empty = Transcript::new("T", vec![]).unwrap();
        assert_eq!(
            align(&[seg("S", 0.0, 1.0, "x")], &empty).unwrap_err(),
            TranscriptError::EmptySkeleton
        );

        let short = Transcript::new("T", vec![frag("S", 0.0, 1.0, "keep")]).unwrap();
        let out = align(&[], &short).unwrap();
        assert_eq!(out.transcript, short);
        assert!(out.report.long_was_empty);
    }

    fn char_multiset(s: impl Iterator<Item = char>) -> Vec<char> {
        let mut v: Vec<char> = s.filter(|c| !c.is_whitespace()).collect();
        v.sort_unstable();
        v
    }

    proptest! {
        #[test]
        fn conserves_text_and_fragment_count(
            frags in prop::collection::vec((0.0f64..5.0, 0.1f64..8.0), 1..12),
            segs in prop::collection::vec((0.0f64..10.0, 0.0f64..20.0, "[a-z]{1,6}([.!?] [a-z]{1,6}){0,4}[.!?]?"), 1..8),
        ) {
            let mut t = 0.0;
            let skeleton: Vec<_> = frags.iter().map(|&(g, d)| { t += g; frag("S", t, t + d, "z") }).collect();
            let short = Transcript::new("T", skeleton).unwrap();
            let mut s = 0.0;
            let long: Vec<_> = segs.iter().map(|(g, d, text)| { s += g; seg("L", s, s + d, text) }).collect();

            let out = align(&long, &short).unwrap();
            prop_assert_eq!(out.transcript.len(), short.len());
            let got = char_multiset(out.transcript.utterances().iter().flat_map(|u| u.text.chars()));
            let want = char_multiset(long.iter().flat_map(|l| l.text.chars()));
            prop_assert_eq!(got, want);
            for (a, b) in out.transcript.utterances().iter().zip(short.utterances()) {
                prop_assert_eq!((a.start, a.end, &a.speaker), (b.start, b.end, &b.speaker));
            }
        }
    }
}
