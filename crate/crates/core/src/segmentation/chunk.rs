use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{SegmentError, TokenCounter};
use crate::exec::Execution;
use crate::transcript::Transcript;

pub const DEFAULT_TOKEN_BUDGET: usize = 3600;

/// A run of consecutive utterances rendered as `Speaker: text` lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub utterance_ids: Range<usize>,
    pub rendered_text: String,
    pub token_count: usize,
}

/// Token count of each rendered line (`Speaker: text\n`).
pub fn line_counts(transcript: &Transcript, counter: &TokenCounter, exec: Execution) -> Vec<usize> {
    exec.map(transcript.utterances(), |u| counter.count(&render_line(&u.rendered())))
}

fn render_line(rendered: &str) -> String {
    let mut line = String::with_capacity(rendered.len() + 1);
    line.push_str(rendered);
    line.push('\n');
    line
}

pub fn chunk(transcript: &Transcript, counter: &TokenCounter, budget: usize) -> Result<Vec<Chunk>, SegmentError> {
    chunk_with(transcript, counter, budget, Execution::Sequential)
}

/// Greedy left-to-right packing: each chunk takes the longest prefix of the
/// remaining utterances that fits the budget. Utterances are never split.
pub fn chunk_with(
    transcript: &Transcript,
    counter: &TokenCounter,
    budget: usize,
    exec: Execution,
) -> Result<Vec<Chunk>, SegmentError> {
    let counts = line_counts(transcript, counter, exec);
    let ranges = pack(&counts, budget)?;
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(index, range)| {
            let rendered_text: String = transcript.utterances()[range.clone()]
                .iter()
                .map(|u| render_line(&u.rendered()))
                .collect();
            let token_count = counts[range.clone()].iter().sum();
            Chunk {
                index,
                utterance_ids: range,
                rendered_text,
                token_count,
            }
        })
        .collect())
}

pub(crate) fn pack(counts: &[usize], budget: usize) -> Result<Vec<Range<usize>>, SegmentError> {
    if budget == 0 {
        return Err(SegmentError::ZeroBudget);
    }
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut used = 0;
    for (id, &tokens) in counts.iter().enumerate() {
        if tokens > budget {
            return Err(SegmentError::OversizedUtterance { id, tokens, budget });
        }
        if used + tokens > budget {
            ranges.push(start..id);
            start = id;
            used = 0;
        }
        used += tokens;
    }
    if start < counts.len() {
        ranges.push(start..counts.len());
    }
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{BpeCounter, PreTokenizer};
    use crate::transcript::Utterance;
    use proptest::prelude::*;

    /// All ways to cut `n` items into contiguous runs.
    fn all_partitions(n: usize) -> Vec<Vec<Range<usize>>> {
        (0..1u32 << n.saturating_sub(1))
            .map(|cuts| {
                let mut parts = Vec::new();
                let mut start = 0;
                for i in 1..n {
                    if cuts & (1 << (i - 1)) != 0 {
                        parts.push(start..i);
                        start = i;
                    }
                }
                parts.push(start..n);
                parts
            })
            .collect()
    }

    /// Every run fits, and no run could have absorbed the next item.
    fn greedy_consistent(counts: &[usize], budget: usize, parts: &[Range<usize>]) -> bool {
        parts.iter().enumerate().all(|(i, r)| {
            let sum: usize = counts[r.clone()].iter().sum();
            let fits = sum <= budget;
            let maximal = match parts.get(i + 1) {
                Some(next) => sum + counts[next.start] > budget,
                None => true,
            };
            fits && maximal
        })
    }

    #[test]
    fn greedy_packing_matches_exhaustive_oracle() {
        let counts = [10, 20, 30];
        let oracle: Vec<_> = all_partitions(3)
            .into_iter()
            .filter(|p| greedy_consistent(&counts, 35, p))
            .collect();
        assert_eq!(oracle, vec![vec![0..2, 2..3]]);
        assert_eq!(pack(&counts, 35).unwrap(), vec![0..2, 2..3]);
    }

    #[test]
    fn oversized_line_is_an_error() {
        assert_eq!(
            pack(&[5, 50, 5], 40).unwrap_err(),
            SegmentError::OversizedUtterance {
                id: 1,
                tokens: 50,
                budget: 40
            }
        );
        assert_eq!(pack(&[1], 0).unwrap_err(), SegmentError::ZeroBudget);
    }

    #[test]
    fn empty_transcript_has_no_chunks() {
        let t = Transcript::new("T", vec![]).unwrap();
        assert!(chunk(&t, &TokenCounter::Words, 3600).unwrap().is_empty());
    }

    fn transcript(lines: &[(&str, &str)]) -> Transcript {
        let utterances = lines
            .iter()
            .enumerate()
            .map(|(i, (s, t))| Utterance {
                id: i,
                speaker: s.to_string(),
                start: i as f64,
                end: i as f64 + 1.0,
                text: t.to_string(),
            })
            .collect();
        Transcript::new("T", utterances).unwrap()
    }

    #[test]
    fn rendered_chunk_text_and_counts() {
        let t = transcript(&[
            ("Alice", "no red gems"),
            ("Bob", "octopus is no touching"),
            ("Alice", "ok"),
        ]);
        let chunks = chunk(&t, &TokenCounter::Words, 9).unwrap();
        // Line counts: 5, 6, 3.
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].rendered_text, "Alice: no red gems\n");
        assert_eq!(chunks[1].rendered_text, "Bob: octopus is no touching\nAlice: ok\n");
        assert_eq!(chunks[1].token_count, 9);
    }

    fn arb_lines() -> impl Strategy<Value = Vec<(String, String)>> {
        prop::collection::vec(("[A-Z][a-z]{0,6}( [0-9])?", "[a-zA-Z ,.'!?]{1,80}"), 0..60)
    }

    proptest! {
        #[test]
        fn chunks_partition_and_fit(lines in arb_lines(), budget in 30usize..200) {
            let refs: Vec<(&str, &str)> = lines.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let t = transcript(&refs);
            let merges = "\u{120} t\nh e\n\u{120}t he\ne s\n";
            let counters = [TokenCounter::Words, TokenCounter::Bpe(BpeCounter::from_merges(merges, PreTokenizer::Gpt2).unwrap())];
            for counter in &counters {
                let chunks = match chunk(&t, counter, budget) {
                    Ok(c) => c,
                    Err(SegmentError::OversizedUtterance { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let mut next = 0;
                for (i, c) in chunks.iter().enumerate() {
                    prop_assert_eq!(c.index, i);
                    prop_assert_eq!(c.utterance_ids.start, next);
                    prop_assert!(!c.utterance_ids.is_empty());
                    prop_assert!(c.token_count <= budget);
                    // Lines end in a newline, so pre-tokens never straddle lines
                    // and the whole-chunk count equals the per-line sum.
                    prop_assert_eq!(counter.count(&c.rendered_text), c.token_count);
                    next = c.utterance_ids.end;
                }
                prop_assert_eq!(next, t.len());
                prop_assert_eq!(chunk(&t, counter, budget).unwrap(), chunks);
            }
        }
    }
}
