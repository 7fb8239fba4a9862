use std::path::PathBuf;

use clap::Args;
use milestone_core::synth::study_teams;
use milestone_core::transcript::to_jsonl;

use crate::fail::{Outcome, Tag};
use crate::files::write_atomic;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Receives `transcripts/` and `ground_truth/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Twenty synthetic meetings whose achievements mirror the study's teams.
pub fn run(args: &SynthArgs) -> Outcome<()> {
    let teams = study_teams(args.seed);
    for team in &teams {
        let id = &team.transcript.team_id;
        let path = args.out.join("transcripts").join(format!("{id}.jsonl"));
        write_atomic(&path, &to_jsonl(&team.transcript)).data(format!("writing {}", path.display()))?;
        let path = args.out.join("ground_truth").join(format!("{id}.json"));
        let text = serde_json::to_string_pretty(&team.truth).expect("ground truth serializes");
        write_atomic(&path, &text).data(format!("writing {}", path.display()))?;
    }
    println!("wrote {} teams under {}", teams.len(), args.out.display());
    Ok(())
}
