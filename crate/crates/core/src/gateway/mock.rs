//! Scripted backend for offline, reproducible runs.
//!
//! Script file: `{"<team>": {"<chunk>": {"<trial>": "<response>"}}}`. Chunk and
//! trial keys are decimal indices or `*`, and the team key may be `*`. The most
//! specific entry wins (team, then chunk, then trial).

use std::collections::BTreeMap;

use super::{BackendError, ChatBackend, CompletionRequest, CompletionResponse, GatewayError, RequestContext};
use crate::segmentation::TokenCounter;

const WILDCARD: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockFallback {
    /// Answer with the summary carried into the request, i.e. "no change".
    #[default]
    EchoSummary,
    /// Answer with an empty string (an unparseable response).
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    entries: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>>,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let entries: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>> =
            serde_json::from_str(text).map_err(|e| GatewayError::Config(format!("mock script: {e}")))?;
        for (team, chunks) in &entries {
            for (chunk, trials) in chunks {
                check_key(chunk, || format!("team `{team}`"))?;
                for trial in trials.keys() {
                    check_key(trial, || format!("team `{team}` chunk `{chunk}`"))?;
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, team: &str, chunk: &str, trial: &str, response: impl Into<String>) {
        self.entries
            .entry(team.to_string())
            .or_default()
            .entry(chunk.to_string())
            .or_default()
            .insert(trial.to_string(), response.into());
    }

    pub fn lookup(&self, team: &str, chunk: usize, trial: usize) -> Option<&str> {
        let (chunk, trial) = (chunk.to_string(), trial.to_string());
        for team_key in [team, WILDCARD] {
            let Some(chunks) = self.entries.get(team_key) else {
                continue;
            };
            for chunk_key in [chunk.as_str(), WILDCARD] {
                let Some(trials) = chunks.get(chunk_key) else {
                    continue;
                };
                for trial_key in [trial.as_str(), WILDCARD] {
                    if let Some(r) = trials.get(trial_key) {
                        return Some(r);
                    }
                }
            }
        }
        None
    }
}

fn check_key(key: &str, context: impl Fn() -> String) -> Result<(), GatewayError> {
    if key == WILDCARD || key.parse::<usize>().is_ok() {
        Ok(())
    } else {
        Err(GatewayError::Config(format!(
            "mock script: {}: key `{key}` is not an index or `*`",
            context()
        )))
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    fallback: MockFallback,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            fallback: MockFallback::default(),
        }
    }

    pub fn with_fallback(mut self, fallback: MockFallback) -> Self {
        self.fallback = fallback;
        self
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest, ctx: &RequestContext) -> Result<CompletionResponse, BackendError> {
        let content = match self.script.lookup(&ctx.team_id, ctx.chunk_index, ctx.trial_index) {
            Some(r) => r.to_string(),
            None => match self.fallback {
                MockFallback::EchoSummary => ctx.current_summary.clone().unwrap_or_default(),
                MockFallback::Empty => String::new(),
            },
        };
        let words = TokenCounter::Words;
        Ok(CompletionResponse {
            prompt_tokens: request.messages.iter().map(|m| words.count(&m.content) as u64).sum(),
            completion_tokens: words.count(&content) as u64,
            content,
        })
    }
}
