use serde::{Deserialize, Serialize};

use super::{ParseOutcome, SummaryState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeFlag {
    /// The reply would have blanked a milestone that was already found.
    EmptyDowngradeBlocked { key: String },
}

/// Non-empty replies replace the previous value; empty or missing replies
/// never erase a found sentence. An unparseable reply changes nothing.
pub fn merge_summary(prev: &SummaryState, parsed: &ParseOutcome) -> (SummaryState, Vec<MergeFlag>) {
    let Some(update) = &parsed.summary else {
        return (prev.clone(), Vec::new());
    };
    let mut next = prev.clone();
    let mut flags = Vec::new();
    for (key, old) in prev.iter() {
        let new = update.get(key).unwrap_or("");
        if !new.trim().is_empty() {
            next.set(key, new);
        } else if !old.is_empty() {
            flags.push(MergeFlag::EmptyDowngradeBlocked { key: key.to_string() });
        }
    }
    (next, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::Violation;
    use proptest::prelude::*;

    fn summary(pairs: &[(&str, &str)]) -> SummaryState {
        let mut s = SummaryState::for_names(pairs.iter().map(|(k, _)| *k));
        for (k, v) in pairs {
            s.set(k, *v);
        }
        s
    }

    fn parsed(s: SummaryState) -> ParseOutcome {
        ParseOutcome {
            summary: Some(s),
            violations: vec![],
        }
    }

    #[test]
    fn adopts_new_sentence() {
        let (next, flags) = merge_summary(&summary(&[("one", "")]), &parsed(summary(&[("one", "S")])));
        assert_eq!(next.get("one"), Some("S"));
        assert!(flags.is_empty());
    }

    #[test]
    fn blocks_empty_downgrade() {
        let (next, flags) = merge_summary(&summary(&[("one", "S")]), &parsed(summary(&[("one", "")])));
        assert_eq!(next.get("one"), Some("S"));
        assert_eq!(flags, vec![MergeFlag::EmptyDowngradeBlocked { key: "one".into() }]);
    }

    #[test]
    fn unparseable_is_a_no_op() {
        let prev = summary(&[("one", "S"), ("hex", "")]);
        let (next, flags) = merge_summary(&prev, &ParseOutcome::unparseable());
        assert_eq!(next, prev);
        assert!(flags.is_empty());
        assert!(ParseOutcome::unparseable().has(Violation::Unparseable));
    }

    proptest! {
        #[test]
        fn found_sentences_never_disappear(
            steps in prop::collection::vec(prop::collection::vec(prop::option::of("[a-z]{0,3}"), 3), 1..10)
        ) {
            let keys = ["a", "b", "c"];
            let mut state = SummaryState::for_names(keys);
            for step in steps {
                let mut update = SummaryState::for_names(keys);
                for (k, v) in keys.iter().zip(&step) {
                    if let Some(v) = v {
                        update.set(k, v.clone());
                    }
                }
                let (next, _) = merge_summary(&state, &parsed(update));
                for k in keys {
                    if !state.get(k).unwrap().is_empty() {
                        prop_assert!(!next.get(k).unwrap().is_empty());
                    }
                }
                state = next;
            }
        }
    }
}
