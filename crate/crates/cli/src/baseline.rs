use milestone_core::baseline::{EmbedError, TeamRanking};

use crate::config::RunArgs;
use crate::fail::{Failure, Kind, Outcome, Tag};
use crate::files::write_atomic;

pub fn run(args: &RunArgs) -> Outcome<()> {
    let cfg = args.resolve()?;
    let spec = cfg.puzzle()?;
    let thresholds = cfg.threshold_table(&spec)?;
    let transcripts = cfg.transcripts()?;
    let embedder = cfg.embedder()?;
    let provider = embedder.provider();
    let exec = args.execution();
    let saved = cfg.output_dir.join("run_config.json");
    write_atomic(&saved, &cfg.to_json()).data(format!("writing {}", saved.display()))?;

    let rankings = args
        .pool()?
        .install(|| exec.map(&transcripts, |t| TeamRanking::compute(t, &spec, provider, exec)));
    let dir = cfg.output_dir.join("baseline");
    for (t, ranking) in transcripts.iter().zip(rankings) {
        let ranking = ranking.map_err(|e| {
            let kind = if matches!(e, EmbedError::Backend(_)) {
                Kind::Backend
            } else {
                Kind::Data
            };
            Failure::new(
                kind,
                anyhow::Error::new(e).context(format!("ranking team {}", t.team_id)),
            )
        })?;
        let path = dir.join("rankings").join(format!("{}.json", t.team_id));
        let text = serde_json::to_string_pretty(&ranking).expect("ranking serializes");
        write_atomic(&path, &text).data(format!("writing {}", path.display()))?;
        for &k in &cfg.k {
            let result = ranking.detect(&thresholds, k).config("thresholds")?;
            let path = dir.join(format!("top{k}")).join(format!("{}.json", t.team_id));
            let text = serde_json::to_string_pretty(&result).expect("result serializes");
            write_atomic(&path, &text).data(format!("writing {}", path.display()))?;
        }
    }
    embedder.finish()?;
    let ks: Vec<String> = cfg.k.iter().map(|k| format!("top{k}")).collect();
    println!(
        "ranked {} team(s) with `{}`; wrote {} under {}",
        transcripts.len(),
        provider.name(),
        ks.join(", "),
        dir.display()
    );
    Ok(())
}
