//! Canonical JSON Lines transcripts: one `{"speaker","start","end","text"}` object
//! per line, optional `id` (ignored on read, ids are re-assigned densely).

use serde_json::{Map, Value};

use super::{LongSegment, Transcript, TranscriptError, Utterance};

struct Row {
    speaker: String,
    start: f64,
    end: f64,
    text: String,
}

fn parse_rows(jsonl: &str) -> Result<Vec<(usize, Row)>, TranscriptError> {
    let mut rows = Vec::new();
    for (idx, line) in jsonl.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| TranscriptError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| TranscriptError::Parse {
            line: line_no,
            reason: "expected a JSON object".into(),
        })?;
        rows.push((
            line_no,
            Row {
                speaker: string_field(obj, "speaker", line_no)?,
                start: number_field(obj, "start", line_no)?,
                end: number_field(obj, "end", line_no)?,
                text: string_field(obj, "text", line_no)?,
            },
        ));
    }
    Ok(rows)
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, line: usize) -> Result<&'a Value, TranscriptError> {
    obj.get(name).ok_or_else(|| TranscriptError::MissingField {
        line,
        field: name.to_string(),
    })
}

fn string_field(obj: &Map<String, Value>, name: &str, line: usize) -> Result<String, TranscriptError> {
    field(obj, name, line)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| TranscriptError::Parse {
            line,
            reason: format!("`{name}` must be a string"),
        })
}

fn number_field(obj: &Map<String, Value>, name: &str, line: usize) -> Result<f64, TranscriptError> {
    field(obj, name, line)?.as_f64().ok_or_else(|| TranscriptError::Parse {
        line,
        reason: format!("`{name}` must be a number"),
    })
}

pub fn parse_canonical(team_id: &str, jsonl: &str) -> Result<Transcript, TranscriptError> {
    let rows = parse_rows(jsonl)?;
    let mut previous = f64::NEG_INFINITY;
    let mut utterances = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.end < row.start {
            return Err(TranscriptError::Parse {
                line,
                reason: format!("end {} before start {}", row.end, row.start),
            });
        }
        if row.start < previous {
            return Err(TranscriptError::Parse {
                line,
                reason: format!("start {} earlier than previous start {previous}", row.start),
            });
        }
        previous = row.start;
        utterances.push(Utterance {
            id: utterances.len(),
            speaker: row.speaker,
            start: row.start,
            end: row.end,
            text: row.text,
        });
    }
    Transcript::new(team_id, utterances)
}

/// Long-form monologue segments share the canonical line format.
pub fn parse_long_segments(jsonl: &str) -> Result<Vec<LongSegment>, TranscriptError> {
    parse_rows(jsonl)?
        .into_iter()
        .map(|(line, row)| {
            if row.end < row.start {
                return Err(TranscriptError::Parse {
                    line,
                    reason: format!("end {} before start {}", row.end, row.start),
                });
            }
            Ok(LongSegment {
                speaker: row.speaker,
                start: row.start,
                end: row.end,
                text: row.text,
            })
        })
        .collect()
}

pub fn to_jsonl(transcript: &Transcript) -> String {
    let mut out = String::new();
    for u in transcript.utterances() {
        // Field order is fixed by the struct definition.
        out.push_str(&serde_json::to_string(u).expect("utterance serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_lines() {
        let raw = r#"{"speaker":"A","start":0,"end":1.5,"text":"hi"}
{"speaker":"B","start":1.5,"end":2,"text":"no red gems","id":9}
"#;
        let t = parse_canonical("T", raw).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.utterances()[1].id, 1);
    }

    #[test]
    fn end_before_start_is_rejected() {
        let raw = r#"{"speaker":"A","start":3,"end":1,"text":"hi"}"#;
        assert!(matches!(
            parse_canonical("T", raw),
            Err(TranscriptError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_field_names_line() {
        let raw = "{\"speaker\":\"A\",\"start\":0,\"end\":1,\"text\":\"a\"}\n{\"speaker\":\"A\",\"start\":1,\"text\":\"b\"}\n";
        assert_eq!(
            parse_canonical("T", raw).unwrap_err(),
            TranscriptError::MissingField {
                line: 2,
                field: "end".into()
            }
        );
    }

    #[test]
    fn non_monotone_start_is_rejected() {
        let raw = "{\"speaker\":\"A\",\"start\":5,\"end\":6,\"text\":\"a\"}\n{\"speaker\":\"A\",\"start\":1,\"end\":2,\"text\":\"b\"}\n";
        assert!(matches!(
            parse_canonical("T", raw),
            Err(TranscriptError::Parse { line: 2, .. })
        ));
    }

    fn arb_transcript() -> impl Strategy<Value = Transcript> {
        prop::collection::vec(("[A-D][a-z]{0,5}", 0.0f64..30.0, 0.0f64..10.0, "[ -~]{1,40}"), 0..30).prop_map(|rows| {
            let mut start = 0.0;
            let utterances = rows
                .into_iter()
                .map(|(speaker, gap, dur, text)| {
                    start += gap;
                    Utterance {
                        id: 0,
                        speaker,
                        start,
                        end: start + dur,
                        text,
                    }
                })
                .collect();
            Transcript::new("T", utterances).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(t in arb_transcript()) {
            let text = to_jsonl(&t);
            let back = parse_canonical("T", &text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(to_jsonl(&back), text);
        }
    }
}
