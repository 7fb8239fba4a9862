//! WebVTT captions as exported by videoconferencing tools.
//!
//! Cue payloads carry the speaker as a `Speaker: text` prefix (or a `<v Speaker>`
//! voice span). Cues without one inherit the previous cue's speaker.

use super::{Transcript, TranscriptError, Utterance};

const UNKNOWN_SPEAKER: &str = "unknown";

pub fn parse_vtt(team_id: &str, raw: &str) -> Result<Transcript, TranscriptError> {
    let raw = raw.strip_prefix('\u{feff}').unwrap_or(raw);
    if raw.trim().is_empty() {
        return Err(TranscriptError::NoCues);
    }

    let lines: Vec<&str> = raw.lines().collect();
    let mut i = 0;
    // Header block runs until the first blank line.
    if lines.first().is_some_and(|l| l.trim_start().starts_with("WEBVTT")) {
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
    }

    let mut utterances = Vec::new();
    let mut last_speaker: Option<String> = None;

    while i < lines.len() {
        let line = lines[i].trim();
        if line.is_empty() {
            i += 1;
            continue;
        }
        if line.starts_with("NOTE") || line.starts_with("STYLE") || line.starts_with("REGION") {
            while i < lines.len() && !lines[i].trim().is_empty() {
                i += 1;
            }
            continue;
        }

        // Optional cue identifier line before the timing line.
        let timing_idx = if line.contains("-->") {
            i
        } else if i + 1 < lines.len() && lines[i + 1].contains("-->") {
            i + 1
        } else {
            return Err(TranscriptError::Parse {
                line: i + 1,
                reason: format!("expected cue timing, found `{line}`"),
            });
        };
        let (start, end) = parse_timing(lines[timing_idx], timing_idx + 1)?;

        let mut payload = Vec::new();
        i = timing_idx + 1;
        while i < lines.len() && !lines[i].trim().is_empty() {
            payload.push(lines[i].trim());
            i += 1;
        }
        let payload = payload.join(" ");
        let (speaker, text) = split_speaker(&payload);
        let text = text.trim().to_string();
        if text.is_empty() {
            continue;
        }
        let speaker = match speaker {
            Some(s) => {
                last_speaker = Some(s.clone());
                s
            }
            None => last_speaker.clone().unwrap_or_else(|| UNKNOWN_SPEAKER.to_string()),
        };
        utterances.push(Utterance {
            id: utterances.len(),
            speaker,
            start,
            end,
            text,
        });
    }

    if utterances.is_empty() {
        return Err(TranscriptError::NoCues);
    }
    Transcript::new(team_id, utterances)
}

fn parse_timing(line: &str, line_no: usize) -> Result<(f64, f64), TranscriptError> {
    let err = |reason: String| TranscriptError::Parse { line: line_no, reason };
    let (left, right) = line.split_once("-->").ok_or_else(|| err("missing `-->`".to_string()))?;
    // Cue settings may follow the end timestamp.
    let right = right.split_whitespace().next().unwrap_or("");
    let start = parse_timestamp(left.trim()).ok_or_else(|| err(format!("malformed timestamp `{}`", left.trim())))?;
    let end = parse_timestamp(right).ok_or_else(|| err(format!("malformed timestamp `{right}`")))?;
    if end < start {
        return Err(err("cue ends before it starts".to_string()));
    }
    Ok((start, end))
}

/// `HH:MM:SS.mmm` or `MM:SS.mmm`.
fn parse_timestamp(s: &str) -> Option<f64> {
    let (clock, millis) = s.split_once('.')?;
    if millis.len() != 3 || !millis.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, sec) = match parts.as_slice() {
        [h, m, s] => (*h, *m, *s),
        [m, s] => ("0", *m, *s),
        _ => return None,
    };
    let num = |p: &str| -> Option<u64> {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        p.parse().ok()
    };
    let (h, m, sec, ms) = (num(h)?, num(m)?, num(sec)?, num(millis)?);
    if m >= 60 || sec >= 60 || (parts.len() == 3 && parts[1].len() != 2) || parts.last()?.len() != 2 {
        return None;
    }
    let total_ms = ((h * 60 + m) * 60 + sec) * 1000 + ms;
    Some(total_ms as f64 / 1000.0)
}

fn split_speaker(payload: &str) -> (Option<String>, &str) {
    if let Some(rest) = payload.strip_prefix("<v") {
        if let Some((tag, text)) = rest.split_once('>') {
            // `<v.loud Alice>` carries classes before the name.
            let name = if tag.starts_with('.') {
                tag.split_once(' ').map_or("", |(_, n)| n).trim()
            } else {
                tag.trim()
            };
            let text = text.strip_suffix("</v>").unwrap_or(text);
            if !name.is_empty() {
                return (Some(name.to_string()), text);
            }
            return (None, text);
        }
    }
    match payload.split_once(": ") {
        Some((speaker, text)) if !speaker.trim().is_empty() => (Some(speaker.trim().to_string()), text),
        _ => (None, payload),
    }
}
