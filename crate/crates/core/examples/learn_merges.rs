//! Regenerates `fixtures/merges.txt` from synthetic meetings and the bundled
//! puzzle text.
//!
//!     cargo run -p milestone-core --example learn_merges -- fixtures/merges.txt

use milestone_core::prompting::{PuzzleSpec, DEFAULT_REQUEST};
use milestone_core::segmentation::{learn_merges, write_merges, PreTokenizer};
use milestone_core::synth::{generate, study_achievements, SynthConfig};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures/merges.txt".into());
    let spec = PuzzleSpec::bundled();
    let mut corpus = format!(
        "{}\n{}\n{}\n",
        spec.task_description, spec.output_format_instructions, DEFAULT_REQUEST
    );
    for m in &spec.milestones {
        corpus.push_str(&format!("{}: {}\n", m.name, m.solution_statement));
        for p in &m.paraphrases {
            corpus.push_str(p);
            corpus.push('\n');
        }
    }
    for (i, (team, achieved)) in study_achievements().into_iter().take(3).enumerate() {
        let t = generate(&SynthConfig::meeting(team, 100 + i as u64, achieved)).transcript;
        for u in t.utterances() {
            corpus.push_str(&u.rendered());
            corpus.push('\n');
        }
    }
    let merges = learn_merges(&corpus, 1200, PreTokenizer::Gpt2);
    std::fs::write(&out, write_merges(&merges)).expect("write merges");
    eprintln!("wrote {} merges to {out}", merges.len());
}
