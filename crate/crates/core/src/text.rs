//! Sentence normalization and edit-ratio similarity, shared by transcript
//! resolution and hallucination checks.

/// Lowercase, drop a short leading `speaker:` prefix, drop punctuation, and
/// collapse whitespace.
pub fn normalize(s: &str) -> String {
    let body = strip_speaker_prefix(s);
    let mut out = String::with_capacity(body.len());
    for word in body.split_whitespace() {
        let cleaned: String = word
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        if cleaned.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&cleaned);
    }
    out
}

/// A prefix counts as a speaker label when it is at most three words, carries
/// no sentence punctuation, and the colon is followed by whitespace or the end.
fn strip_speaker_prefix(s: &str) -> &str {
    let s = s.trim_start();
    let Some(colon) = s.find(':') else {
        return s;
    };
    let label = s[..colon].trim();
    let after = &s[colon + 1..];
    let label_ok = !label.is_empty()
        && label.split_whitespace().count() <= 3
        && !label.contains(['.', '!', '?', ',', '"', '{', '}']);
    let followed_ok = after.is_empty() || after.starts_with(char::is_whitespace);
    if label_ok && followed_ok {
        after
    } else {
        s
    }
}

/// `1 - levenshtein / max(len)` over chars; two empty strings are identical.
pub fn edit_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}
