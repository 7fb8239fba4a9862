use std::path::PathBuf;

use clap::Args;
use milestone_core::transcript::{align, load_transcript, parse_long_segments, to_jsonl};

use crate::fail::{Outcome, Tag};
use crate::files::write_atomic;

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    /// Long-form monologue segments, one JSON object per line.
    #[arg(long)]
    pub long: PathBuf,
    /// Short-fragment skeleton (`.vtt` or `.jsonl`); its stem names the team.
    #[arg(long)]
    pub short: PathBuf,
    /// Canonical JSONL output.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &AlignArgs) -> Outcome<()> {
    let text = std::fs::read_to_string(&args.long).data(format!("reading {}", args.long.display()))?;
    let long = parse_long_segments(&text).data(format!("{}", args.long.display()))?;
    let short = load_transcript(&args.short).data("loading short transcript")?;
    let aligned = align(&long, &short).data(format!("aligning onto {}", args.short.display()))?;
    write_atomic(&args.out, &to_jsonl(&aligned.transcript)).data(format!("writing {}", args.out.display()))?;
    let r = &aligned.report;
    println!(
        "{}: {} fragments, {} pieces, {} speaker discrepancies, {} empty fragments",
        aligned.transcript.team_id,
        aligned.transcript.len(),
        r.pieces,
        r.speaker_discrepancies,
        r.empty_fragments.len()
    );
    Ok(())
}
