use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use milestone_core::detector::{DetectFailure, DetectionResult, Detector};
use milestone_core::gateway::{
    simulated_limiter, ChatBackend, Gateway, HttpBackend, MockBackend, MockScript, RateLimiter, SystemClock,
};
use milestone_core::prompting::Violation;
use milestone_core::transcript::Transcript;
use serde::Serialize;

use crate::config::{BackendKind, RunArgs, RunConfig};
use crate::fail::{Failure, Kind, Outcome, Tag};
use crate::files::write_atomic;

#[derive(Debug, Serialize)]
struct TrialError {
    trial_index: usize,
    chunks_done: usize,
    chunk_count: usize,
    backend: bool,
    message: String,
}

#[derive(Debug, Default, Serialize)]
struct TeamSummary {
    team_id: String,
    trials_written: usize,
    trials_reused: usize,
    violation_counts: BTreeMap<Violation, usize>,
    downgrades_blocked: usize,
    hallucinated: usize,
    failures: Vec<TrialError>,
}

#[derive(Debug, Serialize)]
struct Summary {
    trials: usize,
    teams: Vec<TeamSummary>,
}

pub fn trial_path(dir: &Path, team: &str, trial: usize) -> PathBuf {
    dir.join(team).join(format!("trial_{trial:02}.json"))
}

fn gateway(cfg: &RunConfig, counter: Arc<milestone_core::segmentation::TokenCounter>) -> Outcome<Gateway> {
    let (backend, limiter): (Arc<dyn ChatBackend>, _) = match cfg.backend {
        BackendKind::Mock => {
            let script = match &cfg.mock_script {
                Some(p) => {
                    let text = std::fs::read_to_string(p).config(format!("reading {}", p.display()))?;
                    MockScript::from_json(&text).config(format!("mock script {}", p.display()))?
                }
                None => MockScript::default(),
            };
            (Arc::new(MockBackend::new(script)), simulated_limiter(cfg.tpm))
        }
        BackendKind::Http => {
            let backend = HttpBackend::from_env(&cfg.base_url).config("http backend")?;
            let limiter = Arc::new(RateLimiter::new(cfg.tpm, Arc::new(SystemClock::new())));
            (Arc::new(backend), limiter)
        }
    };
    Ok(Gateway::new(backend, limiter, counter).with_jitter_seed(cfg.seed))
}

fn run_team(detector: &Detector, t: &Transcript, trials: usize, dir: &Path) -> TeamSummary {
    let mut summary = TeamSummary {
        team_id: t.team_id.clone(),
        ..TeamSummary::default()
    };
    for trial in 0..trials {
        let path = trial_path(dir, &t.team_id, trial);
        let existing = std::fs::read_to_string(&path)
            .ok()
            .and_then(|text| DetectionResult::from_json(&text).ok())
            .filter(|r| r.team_id == t.team_id && r.trial_index == trial);
        let result = match existing {
            Some(r) => {
                summary.trials_reused += 1;
                r
            }
            None => match detector.detect(t, trial) {
                Ok(r) => {
                    if let Err(e) = write_atomic(&path, &r.to_json()) {
                        summary.failures.push(TrialError {
                            trial_index: trial,
                            chunks_done: r.chunk_count,
                            chunk_count: r.chunk_count,
                            backend: false,
                            message: format!("{e:#}"),
                        });
                        continue;
                    }
                    summary.trials_written += 1;
                    r
                }
                Err(e) => {
                    log::error!("{e}");
                    summary.failures.push(TrialError {
                        trial_index: trial,
                        chunks_done: e.chunks_done,
                        chunk_count: e.chunk_count,
                        backend: matches!(*e.source, DetectFailure::Gateway(_)),
                        message: e.source.to_string(),
                    });
                    continue;
                }
            },
        };
        for (v, n) in &result.violation_counts {
            *summary.violation_counts.entry(*v).or_default() += n;
        }
        summary.downgrades_blocked += result.downgrades_blocked;
        summary.hallucinated += result.milestones.values().filter(|m| m.hallucinated).count();
    }
    summary
}

pub fn run(args: &RunArgs) -> Outcome<()> {
    let cfg = args.resolve()?;
    let spec = cfg.puzzle()?;
    let transcripts = cfg.transcripts()?;
    let counter = Arc::new(cfg.counter()?);
    let gateway = gateway(&cfg, counter.clone())?;
    let detector = Detector::new(&spec, &gateway, &counter, cfg.token_budget).with_model(cfg.model.clone());
    let dir = cfg.output_dir.join("detect");
    let saved = cfg.output_dir.join("run_config.json");
    write_atomic(&saved, &cfg.to_json()).data(format!("writing {}", saved.display()))?;
    for t in &transcripts {
        std::fs::create_dir_all(dir.join(&t.team_id)).data(format!("creating {}", dir.display()))?;
    }

    let exec = args.execution();
    let teams = args
        .pool()?
        .install(|| exec.map(&transcripts, |t| run_team(&detector, t, cfg.trials, &dir)));

    for team in &teams {
        let violations: usize = team.violation_counts.values().sum();
        println!(
            "{}: {} written, {} reused, {} failed, {violations} parse violations, {} hallucinated",
            team.team_id,
            team.trials_written,
            team.trials_reused,
            team.failures.len(),
            team.hallucinated
        );
    }
    let failed = teams.iter().map(|t| t.failures.len()).sum::<usize>();
    let backend_failed = teams.iter().flat_map(|t| &t.failures).any(|f| f.backend);
    let summary = Summary {
        trials: cfg.trials,
        teams,
    };
    let path = cfg.output_dir.join("violations.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&path, &text).data(format!("writing {}", path.display()))?;

    if failed == 0 {
        return Ok(());
    }
    let kind = if backend_failed { Kind::Backend } else { Kind::Data };
    Err(Failure::new(
        kind,
        anyhow::anyhow!("{failed} trial(s) failed; see {}", path.display()),
    ))
}
