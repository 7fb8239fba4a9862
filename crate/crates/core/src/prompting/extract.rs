//! Pulling a milestone summary out of a free-form model reply.
//!
//! Replies drift from the requested format: prose before or after the object,
//! a "previous summary ... updated summary ..." pair, Python-style quoting,
//! missing or extra keys. Every input produces a [`ParseOutcome`].

use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{normalize_key, SummaryState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    NonJsonWrapper,
    MultipleObjects,
    UnknownKey,
    MissingKey,
    NonStringValue,
    Unparseable,
}

impl Violation {
    pub fn code(self) -> &'static str {
        match self {
            Violation::NonJsonWrapper => "NON_JSON_WRAPPER",
            Violation::MultipleObjects => "MULTIPLE_OBJECTS",
            Violation::UnknownKey => "UNKNOWN_KEY",
            Violation::MissingKey => "MISSING_KEY",
            Violation::NonStringValue => "NON_STRING_VALUE",
            Violation::Unparseable => "UNPARSEABLE",
        }
    }
}

/// `summary` is `Some` exactly when `violations` lacks `Unparseable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub summary: Option<SummaryState>,
    pub violations: Vec<Violation>,
}

impl ParseOutcome {
    fn flag(&mut self, v: Violation) {
        if !self.violations.contains(&v) {
            self.violations.push(v);
        }
    }

    pub fn has(&self, v: Violation) -> bool {
        self.violations.contains(&v)
    }

    pub fn unparseable() -> Self {
        Self {
            summary: None,
            violations: vec![Violation::Unparseable],
        }
    }
}

/// Byte spans of top-level brace-balanced `{...}` substrings. Braces inside
/// double-quoted strings do not count.
pub fn find_objects(raw: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in raw.char_indices() {
        if depth > 0 && in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(start..i + 1);
                }
            }
            _ => {}
        }
    }
    spans
}

/// Rewrites single-quoted strings as JSON strings and drops trailing commas.
fn relax(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '"' => {
                out.push('"');
                i += 1;
                while i < chars.len() {
                    out.push(chars[i]);
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        out.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if chars[i - 1] == '"' {
                        break;
                    }
                }
            }
            '\'' => {
                let mut content = String::new();
                i += 1;
                while i < chars.len() && chars[i] != '\'' {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        content.push(chars[i + 1]);
                        i += 2;
                    } else {
                        content.push(chars[i]);
                        i += 1;
                    }
                }
                i += 1;
                out.push_str(&serde_json::to_string(&content).expect("string serializes"));
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(',');
                }
                i += 1;
            }
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

fn parse_object(text: &str) -> Option<Map<String, Value>> {
    let value = serde_json::from_str::<Value>(text)
        .ok()
        .or_else(|| serde_json::from_str::<Value>(&relax(text)).ok())?;
    match value {
        Value::Object(map) => Some(map),
        _ => None,
    }
}

fn strip_fences(s: &str) -> String {
    s.replace("```json", "").replace("```JSON", "").replace("```", "")
}

/// Picks the last object whose keys overlap the milestone names, fills gaps,
/// and records every format violation seen on the way.
pub fn extract_summary(raw: &str, milestone_names: &[String]) -> ParseOutcome {
    let names: Vec<String> = milestone_names.iter().map(|n| normalize_key(n)).collect();
    let candidates: Vec<(Range<usize>, Map<String, Value>)> = find_objects(raw)
        .into_iter()
        .filter_map(|span| parse_object(&raw[span.clone()]).map(|obj| (span, obj)))
        .filter(|(_, obj)| obj.keys().any(|k| names.contains(&normalize_key(k))))
        .collect();

    let Some((_, chosen)) = candidates.last() else {
        return ParseOutcome::unparseable();
    };

    let mut outcome = ParseOutcome {
        summary: None,
        violations: Vec::new(),
    };

    let mut outside = String::new();
    let mut cursor = 0;
    for (span, _) in &candidates {
        outside.push_str(&raw[cursor..span.start]);
        cursor = span.end;
    }
    outside.push_str(&raw[cursor..]);
    if !strip_fences(&outside).trim().is_empty() {
        outcome.flag(Violation::NonJsonWrapper);
    }
    if candidates.len() > 1 {
        outcome.flag(Violation::MultipleObjects);
    }

    let mut summary = SummaryState::for_names(milestone_names.iter().map(String::as_str));
    let mut found = vec![false; names.len()];
    for (key, value) in chosen {
        let Some(pos) = names.iter().position(|n| *n == normalize_key(key)) else {
            outcome.flag(Violation::UnknownKey);
            continue;
        };
        found[pos] = true;
        let text = match value {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Null => String::new(),
            Value::Array(_) | Value::Object(_) => {
                outcome.flag(Violation::NonStringValue);
                String::new()
            }
        };
        summary.set(&milestone_names[pos], text);
    }
    if found.iter().any(|f| !f) {
        outcome.flag(Violation::MissingKey);
    }
    outcome.summary = Some(summary);
    outcome
}
