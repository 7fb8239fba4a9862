//! The fixed-structure milestone prompt, robust parsing of model replies, and
//! the summary update rule.

mod extract;
mod merge;
mod render;

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_summary, find_objects, ParseOutcome, Violation};
pub use merge::{merge_summary, MergeFlag};
pub use render::{render_prompt, render_sections, DEFAULT_REQUEST, UPDATE_RULE};

/// The milestone names of the bundled puzzle, in prompt order.
pub const CANONICAL_MILESTONES: [&str; 6] = ["one", "dual", "quadruple", "octopus", "hex", "solution"];

const BUNDLED_PUZZLE: &str = include_str!("../../fixtures/puzzle.json");

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("puzzle spec: {0}")]
    InvalidSpec(String),
    #[error("summary keys {found:?} do not match milestones {expected:?}")]
    SummaryKeys { expected: Vec<String>, found: Vec<String> },
    #[error("chunk {0} is empty")]
    EmptyChunk(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneSpec {
    pub name: String,
    pub solution_statement: String,
    #[serde(default)]
    pub paraphrases: Vec<String>,
}

impl MilestoneSpec {
    /// The solution statement followed by the paraphrases.
    pub fn references(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.solution_statement.as_str()).chain(self.paraphrases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleSpec {
    pub task_description: String,
    pub milestones: Vec<MilestoneSpec>,
    pub output_format_instructions: String,
    /// Request and update-rule section. Defaults to [`DEFAULT_REQUEST`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<String>,
}

impl PuzzleSpec {
    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        let spec: PuzzleSpec = serde_json::from_str(text).map_err(|e| PromptError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// The Cursed Treasure puzzle shipped with the crate. Rule wording for
    /// milestones other than octopus and hex is a reconstruction.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_PUZZLE).expect("bundled puzzle spec is valid")
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.milestones.is_empty() {
            return Err(PromptError::InvalidSpec("no milestones".into()));
        }
        let mut seen = HashSet::new();
        for m in &self.milestones {
            if m.name.trim().is_empty() {
                return Err(PromptError::InvalidSpec("empty milestone name".into()));
            }
            if !seen.insert(normalize_key(&m.name)) {
                return Err(PromptError::InvalidSpec(format!("duplicate milestone `{}`", m.name)));
            }
            if m.solution_statement.trim().is_empty() {
                return Err(PromptError::InvalidSpec(format!(
                    "milestone `{}` has no solution statement",
                    m.name
                )));
            }
        }
        Ok(())
    }

    pub fn milestone_names(&self) -> Vec<String> {
        self.milestones.iter().map(|m| m.name.clone()).collect()
    }

    pub fn milestone(&self, name: &str) -> Option<&MilestoneSpec> {
        self.milestones.iter().find(|m| m.name == name)
    }

    pub fn request_text(&self) -> &str {
        self.request.as_deref().unwrap_or(DEFAULT_REQUEST)
    }
}

pub(crate) fn normalize_key(k: &str) -> String {
    k.trim().to_lowercase()
}

/// Milestone name → best sentence so far (`""` when nothing found yet).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummaryState(IndexMap<String, String>);

impl SummaryState {
    /// All milestones mapped to `""`.
    pub fn empty(spec: &PuzzleSpec) -> Self {
        Self::for_names(spec.milestones.iter().map(|m| m.name.as_str()))
    }

    pub fn for_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        Self(names.into_iter().map(|n| (n.to_string(), String::new())).collect())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    /// Sets an existing key; unknown keys are ignored.
    pub fn set(&mut self, name: &str, value: impl Into<String>) {
        if let Some(slot) = self.0.get_mut(name) {
            *slot = value.into();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("string map serializes")
    }

    pub fn matches_spec(&self, spec: &PuzzleSpec) -> bool {
        self.len() == spec.milestones.len() && spec.milestones.iter().all(|m| self.0.contains_key(&m.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_spec_has_canonical_milestones() {
        let spec = PuzzleSpec::bundled();
        assert_eq!(spec.milestone_names(), CANONICAL_MILESTONES.map(String::from).to_vec());
        assert!(spec
            .milestone("octopus")
            .unwrap()
            .solution_statement
            .contains("no gems are touching"));
        assert!(spec
            .milestone("hex")
            .unwrap()
            .solution_statement
            .contains("no red gems"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let json = r#"{"task_description":"t","output_format_instructions":"o","milestones":[
            {"name":"one","solution_statement":"a"},{"name":" One","solution_statement":"b"}]}"#;
        assert!(matches!(PuzzleSpec::from_json(json), Err(PromptError::InvalidSpec(_))));
    }

    #[test]
    fn empty_solution_statement_is_rejected() {
        let json = r#"{"task_description":"t","output_format_instructions":"o","milestones":[{"name":"one","solution_statement":" "}]}"#;
        assert!(PuzzleSpec::from_json(json).is_err());
    }

    #[test]
    fn empty_summary_serializes_in_spec_order() {
        let spec = PuzzleSpec::bundled();
        let s = SummaryState::empty(&spec);
        let json = s.to_json();
        assert!(json.find("\"one\"").unwrap() < json.find("\"solution\"").unwrap());
        assert!(s.iter().all(|(_, v)| v.is_empty()));
    }
}
