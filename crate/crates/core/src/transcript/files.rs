use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::{parse_canonical, parse_vtt, GroundTruth, Transcript, TranscriptError};

fn read(path: &Path) -> Result<String, TranscriptError> {
    std::fs::read_to_string(path).map_err(|e| TranscriptError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn in_file(path: &Path) -> impl FnOnce(TranscriptError) -> TranscriptError + '_ {
    move |e| TranscriptError::File {
        path: path.display().to_string(),
        source: Box::new(e),
    }
}

fn listing(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, TranscriptError> {
    let entries = std::fs::read_dir(dir).map_err(|e| TranscriptError::Io {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| extensions.contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Reads a `.vtt` or canonical `.jsonl` transcript. The team id is the file stem.
pub fn load_transcript(path: &Path) -> Result<Transcript, TranscriptError> {
    let team = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let text = read(path)?;
    let ext = path
        .extension()
        .and_then(|x| x.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    match ext.as_str() {
        "vtt" => parse_vtt(&team, &text),
        _ => parse_canonical(&team, &text),
    }
    .map_err(in_file(path))
}

/// Every `.vtt` and `.jsonl` file in `dir`, ordered by file name.
pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>, TranscriptError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for path in listing(dir, &["vtt", "jsonl"])? {
        let t = load_transcript(&path)?;
        if !seen.insert(t.team_id.clone()) {
            return Err(in_file(&path)(TranscriptError::Invalid {
                id: 0,
                reason: format!("team {} appears twice", t.team_id),
            }));
        }
        out.push(t);
    }
    Ok(out)
}

/// Every `.json` ground-truth file in `dir`, ordered by file name.
pub fn load_ground_truth(dir: &Path) -> Result<Vec<GroundTruth>, TranscriptError> {
    listing(dir, &["json"])?
        .iter()
        .map(|p| GroundTruth::from_json(&read(p)?).map_err(in_file(p)))
        .collect()
}
