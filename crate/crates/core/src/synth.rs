//! Deterministic synthetic meetings for fixtures, benches and offline runs.
//!
//! A generated meeting is mostly filler chatter about chests and gems, with
//! wrong guesses that mention milestone vocabulary, and one or more correct
//! statements for each milestone the team is configured to reach.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::transcript::{GroundTruth, MilestoneTruth, Transcript, Utterance};

/// Teams (numbered 1 to 20) that reached each milestone in the reference study.
pub const STUDY_ACHIEVERS: [(&str, &[u32]); 6] = [
    ("one", &[2, 3, 5, 6, 10, 11, 12, 13, 15, 16, 20]),
    (
        "dual",
        &[2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 19, 20],
    ),
    (
        "quadruple",
        &[1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16, 17, 19, 20],
    ),
    (
        "octopus",
        &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20],
    ),
    ("hex", &[2, 3, 5, 6, 7, 9, 10, 11, 12, 13, 15, 18, 19, 20]),
    ("solution", &[10, 11, 12]),
];

pub const STUDY_TEAMS: u32 = 20;

pub fn team_id(number: u32) -> String {
    format!("team{number:02}")
}

/// Team id → milestones reached, for all twenty teams.
pub fn study_achievements() -> BTreeMap<String, BTreeSet<String>> {
    (1..=STUDY_TEAMS)
        .map(|n| {
            let reached = STUDY_ACHIEVERS
                .iter()
                .filter(|(_, teams)| teams.contains(&n))
                .map(|(m, _)| m.to_string())
                .collect();
            (team_id(n), reached)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub team_id: String,
    pub seed: u64,
    pub utterances: usize,
    pub duration_s: f64,
    pub speakers: Vec<String>,
    pub milestones: Vec<String>,
    pub achieved: BTreeSet<String>,
}

impl SynthConfig {
    /// A 45-minute, four-person meeting of 540 utterances.
    pub fn meeting(team_id: impl Into<String>, seed: u64, achieved: BTreeSet<String>) -> Self {
        Self {
            team_id: team_id.into(),
            seed,
            utterances: 540,
            duration_s: 45.0 * 60.0,
            speakers: ["Alice", "Bob", "Carol", "Dan"].map(String::from).to_vec(),
            milestones: ["one", "dual", "quadruple", "octopus", "hex", "solution"]
                .map(String::from)
                .to_vec(),
            achieved,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTeam {
    pub transcript: Transcript,
    pub truth: GroundTruth,
}

const OPENERS: &[&str] = &[
    "Okay", "So", "Hmm", "Wait", "Right", "Well", "Yeah", "Alright", "Look", "Hold on",
];

const OBSERVATIONS: &[&str] = &[
    "this chest has three blue gems and a small green one",
    "the next picture shows two big diamonds in the corner",
    "I count five gems here but two of them overlap",
    "can you zoom in on the bottom left chest",
    "let's go back to the first island",
    "the yellow gem looks bigger than the others",
    "we still have ten minutes left on the clock",
    "I'm not sure that chest has any curse at all",
    "write down which symbols appear on each chest",
    "that one has the skull and the map together",
    "maybe we should compare the two chests side by side",
    "I think I mixed up the columns in my notes",
    "the purple gems are all on the left side",
    "there are a lot of small stones in this one",
    "does anyone remember what we said about the third picture",
    "let me share my screen so everyone can see",
    "this picture has the sword symbol but not the skull",
    "there is a red gem touching a blue one right there",
    "I can't tell if those two are the same color",
    "can we make a table of all the chests we have seen",
    "the gems in this chest are spread out quite a bit",
    "this one is almost the same as the previous chest",
    "I'll read out the symbols and you check them",
    "we need to figure out the rest of the curses",
    "my audio cut out for a second, what did you say",
    "the green ones might be emeralds",
    "let's try the next chest and see if the idea holds",
    "that breaks the pattern we had before",
    "I think we are close on this one",
    "hang on, I need to scroll down",
];

const CLOSERS: &[&str] = &["", "", "", " I think", " right", " maybe", " for sure", " no wait"];

const WRONG_GUESSES: &[(&str, &[&str])] = &[
    (
        "one",
        &[
            "Maybe the eye patch is about having a blue gem?",
            "Could the one curse depend on how many chests there are?",
            "I bet the pirate shows up when there is a single gem.",
        ],
    ),
    (
        "dual",
        &[
            "Maybe the swords mean there are two red gems?",
            "Is the dual curse about pairs of the same color?",
            "The swords could be about the gems being in a row.",
        ],
    ),
    (
        "quadruple",
        &[
            "Quadruple might mean four gems in total.",
            "Maybe quadruple is when there are four big gems?",
            "Is it four corners filled for the quadruple?",
        ],
    ),
    (
        "octopus",
        &[
            "Maybe the octopus is about blue gems?",
            "The octopus could mean eight gems in the chest.",
            "Is the octopus when the gems form a circle?",
        ],
    ),
    (
        "hex",
        &[
            "Maybe hex is when there are six gems.",
            "Hex could mean the gems make a hexagon shape.",
            "Is hex when there are more red gems than blue?",
        ],
    ),
    (
        "solution",
        &[
            "The answer might be silver ship.",
            "Could the phrase be sunken treasure?",
        ],
    ),
];

const CORRECT: &[(&str, &[&str])] = &[
    (
        "one",
        &[
            "So the eye patch pirate shows up when big diamonds outnumber small ones.",
            "Yes, more big diamonds than small ones, that is the one curse.",
            "The one curse is just more big than small diamonds.",
        ],
    ),
    (
        "dual",
        &[
            "The crossed swords appear when the chest is symmetric.",
            "Dual is symmetry, both halves of the chest match.",
            "Every chest with the swords is mirrored left to right.",
        ],
    ),
    (
        "quadruple",
        &[
            "Quadruple shows up whenever we see exactly four colors.",
            "It's four different colors for the quadruple one.",
            "Count the colors, four colors means quadruple.",
        ],
    ),
    (
        "octopus",
        &[
            "Octopus happens when none of the gems are touching.",
            "Got it, octopus is when all the gems are apart and nothing touches.",
            "If no gems touch each other we get the octopus.",
        ],
    ),
    (
        "hex",
        &[
            "Hex is whenever there are no red gems in the chest.",
            "No red at all means the hex curse.",
            "The hex sign is there exactly when red is missing.",
        ],
    ),
    (
        "solution",
        &[
            "Putting it together the phrase reads golden anchor.",
            "So our final answer is golden anchor.",
        ],
    ),
];

fn bank<'a>(table: &'a [(&str, &'a [&'a str])], name: &str) -> &'a [&'a str] {
    table.iter().find(|(n, _)| *n == name).map_or(&[], |(_, v)| v)
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    let opener = OPENERS.choose(rng).expect("non-empty");
    let obs = OBSERVATIONS.choose(rng).expect("non-empty");
    let closer = CLOSERS.choose(rng).expect("non-empty");
    let end = if rng.gen_bool(0.15) { "?" } else { "." };
    format!("{opener}, {obs}{closer}{end}")
}

/// Builds one meeting. Same config, same output.
pub fn generate(cfg: &SynthConfig) -> SynthTeam {
    assert!(
        cfg.utterances >= 4 * cfg.milestones.len().max(1),
        "too few utterances for the milestones"
    );
    assert!(!cfg.speakers.is_empty(), "at least one speaker");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.utterances;

    let mut texts: Vec<Option<String>> = vec![None; n];
    let mut valid: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut free: Vec<usize> = (n / 20..n - n / 20).collect();
    free.shuffle(&mut rng);

    let mut take = |lo: f64, hi: f64, texts: &[Option<String>]| -> usize {
        let (lo, hi) = ((lo * n as f64) as usize, (hi * n as f64) as usize);
        let pick = free
            .iter()
            .position(|&i| (lo..hi).contains(&i) && texts[i].is_none())
            .or_else(|| free.iter().position(|&i| texts[i].is_none()))
            .expect("free slot");
        free.swap_remove(pick)
    };

    for name in &cfg.milestones {
        for guess in bank(WRONG_GUESSES, name).iter().take(2) {
            let i = take(0.05, 0.7, &texts);
            texts[i] = Some(guess.to_string());
        }
        if !cfg.achieved.contains(name) {
            continue;
        }
        let correct = bank(CORRECT, name);
        let (lo, hi) = if name == "solution" { (0.85, 0.97) } else { (0.1, 0.8) };
        let statements = if rng.gen_bool(0.5) { 2 } else { 1 };
        let ids = valid.entry(name.clone()).or_default();
        for s in correct.choose_multiple(&mut rng, statements.min(correct.len())) {
            let i = take(lo, hi, &texts);
            texts[i] = Some(s.to_string());
            ids.insert(i);
        }
    }

    let texts: Vec<String> = texts
        .into_iter()
        .map(|t| t.unwrap_or_else(|| filler(&mut rng)))
        .collect();

    // Durations proportional to word count, then scaled to the meeting length.
    let raw: Vec<(f64, f64)> = texts
        .iter()
        .map(|t| {
            (
                0.35 * t.split_whitespace().count() as f64 + 0.3,
                rng.gen_range(0.2..1.2),
            )
        })
        .collect();
    let total: f64 = raw.iter().map(|(d, g)| d + g).sum();
    let scale = cfg.duration_s / total;
    let mut clock = 0.0;
    let mut speaker = 0;
    let mut utterances = Vec::with_capacity(n);
    for (id, (text, (dur, gap))) in texts.into_iter().zip(raw).enumerate() {
        let start = clock;
        let end = start + dur * scale;
        clock = end + gap * scale;
        if cfg.speakers.len() > 1 && rng.gen_bool(0.7) {
            speaker = (speaker + rng.gen_range(1..cfg.speakers.len())) % cfg.speakers.len();
        }
        utterances.push(Utterance {
            id,
            speaker: cfg.speakers[speaker].clone(),
            start: (start * 1000.0).round() / 1000.0,
            end: (end * 1000.0).round() / 1000.0,
            text,
        });
    }

    let transcript = Transcript::new(cfg.team_id.clone(), utterances).expect("generated transcript is valid");
    let milestones = cfg
        .milestones
        .iter()
        .map(|m| {
            let ids = valid.remove(m).unwrap_or_default();
            (
                m.clone(),
                MilestoneTruth {
                    achieved: !ids.is_empty(),
                    valid_utterance_ids: ids,
                },
            )
        })
        .collect();
    SynthTeam {
        transcript,
        truth: GroundTruth {
            team_id: cfg.team_id.clone(),
            milestones,
        },
    }
}

/// All twenty teams with their reference achievements; team `n` uses seed `seed + n`.
pub fn study_teams(seed: u64) -> Vec<SynthTeam> {
    study_achievements()
        .into_iter()
        .enumerate()
        .map(|(i, (team, achieved))| generate(&SynthConfig::meeting(team, seed + i as u64 + 1, achieved)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::TokenCounter;

    #[test]
    fn same_seed_same_meeting() {
        let achieved: BTreeSet<String> = ["octopus", "hex"].map(String::from).into();
        let a = generate(&SynthConfig::meeting("t", 5, achieved.clone()));
        let b = generate(&SynthConfig::meeting("t", 5, achieved.clone()));
        assert_eq!(a, b);
        assert_ne!(a, generate(&SynthConfig::meeting("t", 6, achieved)));
    }

    #[test]
    fn meeting_shape() {
        let team = generate(&SynthConfig::meeting("t", 1, ["one".to_string()].into()));
        let t = &team.transcript;
        assert_eq!(t.len(), 540);
        assert!((t.duration() - 2700.0).abs() < 60.0, "{}", t.duration());
        let rendered: String = t.utterances().iter().map(|u| u.rendered() + "\n").collect();
        let tokens = TokenCounter::Words.count(&rendered);
        assert!((4000..=12000).contains(&tokens), "{tokens}");
    }

    #[test]
    fn truth_matches_transcript() {
        for team in study_teams(0).iter().take(4) {
            team.truth.check_against(&team.transcript).unwrap();
            for (name, m) in &team.truth.milestones {
                for id in &m.valid_utterance_ids {
                    let text = &team.transcript.utterances()[*id].text;
                    assert!(bank(CORRECT, name).contains(&text.as_str()), "{name}: {text}");
                }
            }
        }
    }

    #[test]
    fn achievement_matrix_counts() {
        let a = study_achievements();
        assert_eq!(a.len(), 20);
        let count = |m: &str| a.values().filter(|s| s.contains(m)).count();
        assert_eq!(
            ["one", "dual", "quadruple", "octopus", "hex", "solution"].map(count),
            [11, 18, 18, 20, 14, 3]
        );
    }
}
