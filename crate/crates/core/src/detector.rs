//! The iterative query loop: chunk the transcript, prompt once per chunk with
//! the running summary, merge the reply, then map the final sentences back to
//! utterances.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Message, RequestContext, Role};
use crate::prompting::{
    extract_summary, merge_summary, render_prompt, MilestoneSpec, PromptError, PuzzleSpec, SummaryState, Violation,
};
use crate::segmentation::{chunk, Chunk, SegmentError, TokenCounter};
use crate::text::{edit_ratio, normalize};
use crate::transcript::{resolve_text, MatchKind, Transcript, DEFAULT_FUZZY_THRESHOLD};

pub const DEFAULT_MAX_RESPONSE_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedUtterance {
    pub utterance_id: usize,
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneDetection {
    pub raw_sentence: String,
    pub resolved: Option<ResolvedUtterance>,
    pub match_kind: Option<MatchKind>,
    pub hallucinated: bool,
}

impl MilestoneDetection {
    pub fn is_empty(&self) -> bool {
        self.raw_sentence.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub team_id: String,
    pub trial_index: usize,
    pub chunk_count: usize,
    pub milestones: IndexMap<String, MilestoneDetection>,
    pub violation_counts: BTreeMap<Violation, usize>,
    pub downgrades_blocked: usize,
}

impl DetectionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detection result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error)]
pub enum DetectFailure {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A failed run, with the summary reached before the failure.
#[derive(Debug, Error)]
#[error("team {team_id} trial {trial_index}: {source} (after {chunks_done} of {chunk_count} chunks)")]
pub struct DetectError {
    pub team_id: String,
    pub trial_index: usize,
    pub chunks_done: usize,
    pub chunk_count: usize,
    pub summary: Option<Box<SummaryState>>,
    #[source]
    pub source: Box<DetectFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: usize,
    pub chunks_done: usize,
    pub message: String,
}

/// All trials for one team; `results` holds the successful ones in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub team_id: String,
    pub results: Vec<DetectionResult>,
    pub failures: Vec<TrialFailure>,
}

pub struct Detector<'a> {
    pub spec: &'a PuzzleSpec,
    pub gateway: &'a Gateway,
    pub counter: &'a TokenCounter,
    pub budget: usize,
    pub model_name: String,
    pub max_response_tokens: u32,
}

impl<'a> Detector<'a> {
    pub fn new(spec: &'a PuzzleSpec, gateway: &'a Gateway, counter: &'a TokenCounter, budget: usize) -> Self {
        Self {
            spec,
            gateway,
            counter,
            budget,
            model_name: "gpt-3.5-turbo".into(),
            max_response_tokens: DEFAULT_MAX_RESPONSE_TOKENS,
        }
    }

    pub fn with_model(mut self, model_name: impl Into<String>) -> Self {
        self.model_name = model_name.into();
        self
    }

    pub fn detect(&self, transcript: &Transcript, trial_index: usize) -> Result<DetectionResult, DetectError> {
        let chunks = chunk(transcript, self.counter, self.budget).map_err(|e| DetectError {
            team_id: transcript.team_id.clone(),
            trial_index,
            chunks_done: 0,
            chunk_count: 0,
            summary: None,
            source: Box::new(e.into()),
        })?;
        self.detect_chunks(transcript, &chunks, trial_index)
    }

    fn detect_chunks(
        &self,
        transcript: &Transcript,
        chunks: &[Chunk],
        trial_index: usize,
    ) -> Result<DetectionResult, DetectError> {
        let names = self.spec.milestone_names();
        let mut summary = SummaryState::empty(self.spec);
        let mut violation_counts = BTreeMap::new();
        let mut downgrades_blocked = 0;

        for (done, c) in chunks.iter().enumerate() {
            let fail = |summary: &SummaryState, source: DetectFailure| DetectError {
                team_id: transcript.team_id.clone(),
                trial_index,
                chunks_done: done,
                chunk_count: chunks.len(),
                summary: Some(Box::new(summary.clone())),
                source: Box::new(source),
            };
            let prompt = render_prompt(self.spec, &summary, c).map_err(|e| fail(&summary, e.into()))?;
            let request = CompletionRequest::new(
                self.model_name.clone(),
                vec![Message {
                    role: Role::User,
                    content: prompt,
                }],
                self.max_response_tokens,
            )
            .map_err(|e| fail(&summary, e.into()))?;
            let ctx = RequestContext {
                team_id: transcript.team_id.clone(),
                chunk_index: c.index,
                trial_index,
                current_summary: Some(summary.to_json()),
            };
            let reply = self
                .gateway
                .complete(&request, &ctx)
                .map_err(|e| fail(&summary, e.into()))?;

            let parsed = extract_summary(&reply.response.content, &names);
            for v in &parsed.violations {
                *violation_counts.entry(*v).or_insert(0) += 1;
            }
            if parsed.summary.is_none() {
                log::warn!(
                    "team {} trial {trial_index} chunk {}: unparseable reply, summary unchanged",
                    transcript.team_id,
                    c.index
                );
            }
            let (next, flags) = merge_summary(&summary, &parsed);
            downgrades_blocked += flags.len();
            summary = next;
        }

        let milestones = self
            .spec
            .milestones
            .iter()
            .map(|m| {
                let raw = summary.get(&m.name).unwrap_or("");
                (m.name.clone(), resolve_milestone(transcript, m, raw))
            })
            .collect();

        Ok(DetectionResult {
            team_id: transcript.team_id.clone(),
            trial_index,
            chunk_count: chunks.len(),
            milestones,
            violation_counts,
            downgrades_blocked,
        })
    }

    /// `n` independent runs with trial indices `0..n`. A failed trial is
    /// recorded and the remaining trials still run.
    pub fn run_trials(&self, transcript: &Transcript, n: usize) -> TrialBatch {
        let mut batch = TrialBatch {
            team_id: transcript.team_id.clone(),
            results: Vec::with_capacity(n),
            failures: Vec::new(),
        };
        let chunks = match chunk(transcript, self.counter, self.budget) {
            Ok(chunks) => chunks,
            Err(e) => {
                let message = e.to_string();
                batch.failures = (0..n)
                    .map(|trial_index| TrialFailure {
                        trial_index,
                        chunks_done: 0,
                        message: message.clone(),
                    })
                    .collect();
                return batch;
            }
        };
        for trial in 0..n {
            match self.detect_chunks(transcript, &chunks, trial) {
                Ok(r) => batch.results.push(r),
                Err(e) => {
                    log::error!("{e}");
                    batch.failures.push(TrialFailure {
                        trial_index: trial,
                        chunks_done: e.chunks_done,
                        message: e.to_string(),
                    });
                }
            }
        }
        batch
    }

    /// Teams run concurrently under `exec`; each team's chunks stay sequential.
    pub fn run_teams(&self, transcripts: &[Transcript], n: usize, exec: Execution) -> Vec<TrialBatch> {
        exec.map(transcripts, |t| self.run_trials(t, n))
    }
}

/// Largest normalized edit ratio between `sentence` and any reference text of
/// the milestone.
pub fn reference_similarity(milestone: &MilestoneSpec, sentence: &str) -> f64 {
    let wanted = normalize(sentence);
    milestone
        .references()
        .map(|r| edit_ratio(&wanted, &normalize(r)))
        .fold(0.0, f64::max)
}

fn resolve_milestone(transcript: &Transcript, milestone: &MilestoneSpec, raw: &str) -> MilestoneDetection {
    if raw.trim().is_empty() {
        return MilestoneDetection {
            raw_sentence: String::new(),
            resolved: None,
            match_kind: None,
            hallucinated: false,
        };
    }
    match resolve_text(transcript, raw) {
        Some(r) => MilestoneDetection {
            raw_sentence: raw.to_string(),
            resolved: Some(ResolvedUtterance {
                utterance_id: r.utterance.id,
                speaker: r.utterance.speaker.clone(),
                start: r.utterance.start,
                end: r.utterance.end,
            }),
            match_kind: Some(r.kind),
            hallucinated: false,
        },
        None => MilestoneDetection {
            raw_sentence: raw.to_string(),
            resolved: None,
            match_kind: None,
            hallucinated: reference_similarity(milestone, raw) >= DEFAULT_FUZZY_THRESHOLD,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{
        simulated_limiter, BackendError, ChatBackend, CompletionResponse, MockBackend, MockFallback, MockScript,
    };
    use crate::transcript::Utterance;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn transcript(lines: &[(&str, &str)]) -> Transcript {
        let utterances = lines
            .iter()
            .enumerate()
            .map(|(i, (speaker, text))| Utterance {
                id: i,
                speaker: speaker.to_string(),
                start: i as f64 * 5.0,
                end: i as f64 * 5.0 + 4.0,
                text: text.to_string(),
            })
            .collect();
        Transcript::new("t1", utterances).unwrap()
    }

    fn meeting() -> Transcript {
        transcript(&[
            ("Alice", "Let's look at the map first."),
            ("Bob", "I think the octopus shows up when gems are apart."),
            ("Carol", "Right, octopus means none of the gems touch."),
            ("Alice", "And hex is there whenever we have no red gems."),
            ("Bob", "Let us write that down."),
            ("Carol", "Okay, next island."),
        ])
    }

    fn gateway(backend: Arc<dyn ChatBackend>) -> Gateway {
        Gateway::new(backend, simulated_limiter(10_000), Arc::new(TokenCounter::Words))
    }

    fn reply(pairs: &[(&str, &str)]) -> String {
        let mut s = SummaryState::for_names(crate::prompting::CANONICAL_MILESTONES);
        for (k, v) in pairs {
            s.set(k, *v);
        }
        s.to_json()
    }

    // A budget that splits `meeting()` into several chunks under the word counter.
    const SMALL_BUDGET: usize = 24;

    #[test]
    fn scripted_sentence_resolves_to_its_utterance() {
        let t = meeting();
        let counter = TokenCounter::Words;
        let chunks = chunk(&t, &counter, SMALL_BUDGET).unwrap();
        assert!(chunks.len() >= 3);

        let mut script = MockScript::default();
        script.insert(
            "t1",
            "1",
            "*",
            reply(&[("octopus", "Carol: Right, octopus means none of the gems touch.")]),
        );
        let gw = gateway(Arc::new(MockBackend::new(script)));
        let spec = PuzzleSpec::bundled();
        let r = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).detect(&t, 0).unwrap();

        let octopus = &r.milestones["octopus"];
        let resolved = octopus.resolved.as_ref().unwrap();
        assert_eq!(resolved.utterance_id, 2);
        assert_eq!(resolved.speaker, "Carol");
        assert_eq!(resolved.start, 10.0);
        assert!(!octopus.hallucinated);
        assert_eq!(r.chunk_count, chunks.len());
        // Later chunks echo the summary, so the sentence survives.
        assert!(r.milestones["one"].is_empty());
    }

    #[test]
    fn echoed_solution_is_hallucination() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let solution = spec.milestone("octopus").unwrap().solution_statement.clone();
        let mut script = MockScript::default();
        script.insert("*", "0", "*", reply(&[("octopus", &solution)]));
        let gw = gateway(Arc::new(MockBackend::new(script)));
        let counter = TokenCounter::Words;
        let r = Detector::new(&spec, &gw, &counter, 3600).detect(&t, 0).unwrap();
        let octopus = &r.milestones["octopus"];
        assert!(octopus.hallucinated);
        assert!(octopus.resolved.is_none());
        assert_eq!(octopus.raw_sentence, solution);
    }

    #[test]
    fn empty_replies_predict_nothing() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let mut script = MockScript::default();
        script.insert("*", "*", "*", reply(&[]));
        let gw = gateway(Arc::new(MockBackend::new(script)));
        let counter = TokenCounter::Words;
        let r = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).detect(&t, 0).unwrap();
        assert!(r
            .milestones
            .values()
            .all(|m| m.is_empty() && m.resolved.is_none() && !m.hallucinated));
        assert!(r.violation_counts.is_empty());
    }

    #[test]
    fn unparseable_reply_is_counted_and_skipped() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let mut script = MockScript::default();
        script.insert(
            "*",
            "0",
            "*",
            reply(&[("hex", "And hex is there whenever we have no red gems.")]),
        );
        script.insert("*", "1", "*", "Sorry, I cannot help with that.");
        let gw = gateway(Arc::new(MockBackend::new(script)));
        let counter = TokenCounter::Words;
        let r = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).detect(&t, 0).unwrap();
        assert_eq!(r.violation_counts[&Violation::Unparseable], 1);
        assert_eq!(r.milestones["hex"].resolved.as_ref().unwrap().utterance_id, 3);
    }

    struct Counting {
        inner: MockBackend,
        calls: AtomicUsize,
        fail_from: Option<usize>,
    }

    impl ChatBackend for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn complete(&self, req: &CompletionRequest, ctx: &RequestContext) -> Result<CompletionResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_from.is_some_and(|f| n >= f) {
                return Err(BackendError::Status {
                    code: 401,
                    body: "no".into(),
                });
            }
            self.inner.complete(req, ctx)
        }
    }

    #[test]
    fn one_prompt_per_chunk() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let backend = Arc::new(Counting {
            inner: MockBackend::new(MockScript::default()),
            calls: AtomicUsize::new(0),
            fail_from: None,
        });
        let gw = gateway(backend.clone());
        let r = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).detect(&t, 0).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), r.chunk_count);
    }

    #[test]
    fn permanent_failure_keeps_partial_progress() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let mut script = MockScript::default();
        script.insert("*", "0", "*", reply(&[("hex", "x")]));
        let backend = Arc::new(Counting {
            inner: MockBackend::new(script),
            calls: AtomicUsize::new(0),
            fail_from: Some(1),
        });
        let gw = gateway(backend);
        let err = Detector::new(&spec, &gw, &counter, SMALL_BUDGET)
            .detect(&t, 0)
            .unwrap_err();
        assert_eq!(err.chunks_done, 1);
        assert_eq!(err.summary.unwrap().get("hex"), Some("x"));
        assert!(matches!(*err.source, DetectFailure::Gateway(_)));
    }

    #[test]
    fn oversized_utterance_is_an_error() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let gw = gateway(Arc::new(MockBackend::new(MockScript::default())));
        let err = Detector::new(&spec, &gw, &counter, 3).detect(&t, 0).unwrap_err();
        assert!(matches!(
            *err.source,
            DetectFailure::Segment(SegmentError::OversizedUtterance { .. })
        ));
        let batch = Detector::new(&spec, &gw, &counter, 3).run_trials(&t, 2);
        assert!(batch.results.is_empty());
        assert_eq!(batch.failures.len(), 2);
    }

    #[test]
    fn trials_differ_only_where_scripted() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let mut script = MockScript::default();
        script.insert(
            "*",
            "0",
            "*",
            reply(&[("hex", "And hex is there whenever we have no red gems.")]),
        );
        script.insert("*", "0", "1", reply(&[("octopus", "Okay, next island.")]));
        let gw = gateway(Arc::new(MockBackend::new(script)));
        let batch = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).run_trials(&t, 2);
        let (a, b) = (&batch.results[0], &batch.results[1]);
        assert_eq!((a.trial_index, b.trial_index), (0, 1));
        let differing: Vec<&String> = a
            .milestones
            .keys()
            .filter(|k| a.milestones[*k] != b.milestones[*k])
            .collect();
        // Trial 1 replaces the whole chunk-0 reply: hex unset, octopus set.
        assert_eq!(differing, vec!["octopus", "hex"]);
    }

    #[test]
    fn ten_trials_are_identical_with_invariant_script() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let mut script = MockScript::default();
        script.insert(
            "*",
            "1",
            "*",
            reply(&[("octopus", "Right, octopus means none of the gems touch.")]),
        );
        let gw = gateway(Arc::new(
            MockBackend::new(script).with_fallback(MockFallback::EchoSummary),
        ));
        let batch = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).run_trials(&t, 10);
        assert_eq!(batch.results.len(), 10);
        let first = batch.results[0].milestones.clone();
        assert!(batch.results.iter().all(|r| r.milestones == first));
    }

    #[test]
    fn result_json_round_trips() {
        let t = meeting();
        let spec = PuzzleSpec::bundled();
        let counter = TokenCounter::Words;
        let gw = gateway(Arc::new(MockBackend::new(MockScript::default())));
        let r = Detector::new(&spec, &gw, &counter, SMALL_BUDGET).detect(&t, 3).unwrap();
        assert_eq!(DetectionResult::from_json(&r.to_json()).unwrap(), r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn verbatim_sentences_are_never_hallucinated(pick in 0usize..6, with_speaker in any::<bool>()) {
            let t = meeting();
            let spec = PuzzleSpec::bundled();
            let u = &t.utterances()[pick];
            let sentence = if with_speaker { u.rendered() } else { u.text.clone() };
            for m in &spec.milestones {
                let d = resolve_milestone(&t, m, &sentence);
                prop_assert!(!d.hallucinated);
                prop_assert!(d.resolved.is_some());
            }
        }
    }
}
