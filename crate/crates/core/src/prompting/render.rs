use super::{PromptError, PuzzleSpec, SummaryState};
use crate::segmentation::Chunk;

/// The update rule, quoted verbatim inside [`DEFAULT_REQUEST`].
pub const UPDATE_RULE: &str = "update the milestone only if you find a better match to the true answers";

// Reconstructed wording; only the update rule sentence is fixed.
pub const DEFAULT_REQUEST: &str = "Request: read the transcript section below and find, for each milestone, the sentence in which a player correctly states its rule. The current summary holds the best sentence found so far for each milestone, or \"\" if none has been found yet. Update rule: update the milestone only if you find a better match to the true answers. Otherwise keep the current value unchanged. Copy sentences exactly as they appear in the transcript, including the speaker name. Do not copy the solutions given above.";

/// The five prompt sections in order: task, solutions, request and update
/// rule, current summary, transcript section with output instructions.
pub fn render_sections(spec: &PuzzleSpec, summary: &SummaryState, chunk: &Chunk) -> Result<[String; 5], PromptError> {
    if !summary.matches_spec(spec) {
        return Err(PromptError::SummaryKeys {
            expected: spec.milestone_names(),
            found: summary.keys().map(str::to_string).collect(),
        });
    }
    if chunk.utterance_ids.is_empty() || chunk.rendered_text.trim().is_empty() {
        return Err(PromptError::EmptyChunk(chunk.index));
    }

    let mut solutions = String::from("Milestone solutions:");
    for m in &spec.milestones {
        solutions.push_str(&format!("\n- {}: {}", m.name, m.solution_statement));
    }

    let keys = spec
        .milestones
        .iter()
        .map(|m| format!("\"{}\"", m.name))
        .collect::<Vec<_>>()
        .join(", ");
    let separator = if chunk.rendered_text.ends_with('\n') { "" } else { "\n" };
    let transcript = format!(
        "Transcript section:\n{}{separator}{}\nThe JSON object must have exactly these keys: {keys}.",
        chunk.rendered_text,
        spec.output_format_instructions.trim()
    );

    Ok([
        spec.task_description.trim().to_string(),
        solutions,
        spec.request_text().trim().to_string(),
        format!("Current summary:\n{}", summary.to_json()),
        transcript,
    ])
}

pub fn render_prompt(spec: &PuzzleSpec, summary: &SummaryState, chunk: &Chunk) -> Result<String, PromptError> {
    Ok(render_sections(spec, summary, chunk)?.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::TokenCounter;

    fn chunk(text: &str) -> Chunk {
        Chunk {
            index: 0,
            utterance_ids: 0..1,
            rendered_text: text.to_string(),
            token_count: 0,
        }
    }

    #[test]
    fn deterministic_and_contains_update_rule() {
        let spec = PuzzleSpec::bundled();
        let summary = SummaryState::empty(&spec);
        let c = chunk("Alice: no red gems\n");
        let a = render_prompt(&spec, &summary, &c).unwrap();
        let b = render_prompt(&spec, &summary, &c).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(UPDATE_RULE));
        assert!(DEFAULT_REQUEST.contains(UPDATE_RULE));
    }

    #[test]
    fn sections_appear_in_order() {
        let spec = PuzzleSpec::bundled();
        let p = render_prompt(&spec, &SummaryState::empty(&spec), &chunk("Bob: hi\n")).unwrap();
        let positions: Vec<usize> = [
            "Cursed Treasure",
            "Milestone solutions:",
            "Update rule:",
            "Current summary:",
            "Transcript section:\nBob: hi",
            "exactly these keys",
        ]
        .iter()
        .map(|needle| p.find(needle).unwrap_or_else(|| panic!("missing {needle}")))
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn initial_summary_values_are_empty_strings() {
        let spec = PuzzleSpec::bundled();
        let p = render_prompt(&spec, &SummaryState::empty(&spec), &chunk("Bob: hi\n")).unwrap();
        for name in spec.milestone_names() {
            assert!(p.contains(&format!("\"{name}\": \"\"")), "{name}");
        }
    }

    #[test]
    fn token_count_is_sum_of_sections() {
        // Independent route: count each section on its own.
        let spec = PuzzleSpec::bundled();
        let summary = SummaryState::empty(&spec);
        let c = chunk("Alice: octopus means no touching\nBob: wait, really?\n");
        let sections = render_sections(&spec, &summary, &c).unwrap();
        let counter = TokenCounter::Words;
        let by_section: usize = sections.iter().map(|s| counter.count(s)).sum();
        assert_eq!(counter.count(&render_prompt(&spec, &summary, &c).unwrap()), by_section);
    }

    #[test]
    fn different_chunks_give_different_prompts() {
        let spec = PuzzleSpec::bundled();
        let s = SummaryState::empty(&spec);
        assert_ne!(
            render_prompt(&spec, &s, &chunk("A: x\n")).unwrap(),
            render_prompt(&spec, &s, &chunk("A: y\n")).unwrap()
        );
    }

    #[test]
    fn mismatched_summary_is_rejected() {
        let spec = PuzzleSpec::bundled();
        let summary = SummaryState::for_names(["one", "dual"]);
        assert!(matches!(
            render_prompt(&spec, &summary, &chunk("A: x\n")),
            Err(PromptError::SummaryKeys { .. })
        ));
    }
}
