use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use milestone_core::baseline::BaselineResult;
use milestone_core::detector::DetectionResult;
use milestone_core::evaluation::{aggregate, evaluate, MilestoneReport, TeamPredictions};

use crate::config::RunConfig;
use crate::fail::{Failure, Outcome, Tag};
use crate::files::{json_files, write_atomic};
use crate::report;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Directory of detection or baseline result files.
    pub predictions: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub puzzle_spec: Option<PathBuf>,
    /// Where reports go; `<output_dir>/eval` from the config otherwise.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Fail with exit code 2 if any milestone's mean accuracy is below this.
    #[arg(long)]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Detector,
    Baseline,
}

/// Predictions grouped by trial. Baseline results form a single trial.
fn load_predictions(dir: &Path) -> Outcome<BTreeMap<usize, Vec<TeamPredictions>>> {
    let files = json_files(dir).data(format!("listing {}", dir.display()))?;
    if files.is_empty() {
        return Err(Failure::data(format!("{} holds no prediction files", dir.display())));
    }
    let mut trials: BTreeMap<usize, Vec<TeamPredictions>> = BTreeMap::new();
    let mut source = None;
    for path in files {
        let text = std::fs::read_to_string(&path).data(format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text).data(format!("parsing {}", path.display()))?;
        let (kind, trial, preds) = if value.get("proposals").is_some() {
            let r: BaselineResult =
                serde_json::from_value(value).data(format!("baseline result {}", path.display()))?;
            (Source::Baseline, 0, TeamPredictions::from_baseline(&r))
        } else if value.get("trial_index").is_some() {
            let r: DetectionResult =
                serde_json::from_value(value).data(format!("detection result {}", path.display()))?;
            (Source::Detector, r.trial_index, TeamPredictions::from_detection(&r))
        } else {
            return Err(Failure::data(format!(
                "{} is neither a detection nor a baseline result",
                path.display()
            )));
        };
        if source.is_some_and(|s| s != kind) {
            return Err(Failure::data(format!(
                "{} mixes detection and baseline results",
                dir.display()
            )));
        }
        source = Some(kind);
        trials.entry(trial).or_default().push(preds);
    }
    Ok(trials)
}

pub fn run(args: &EvalArgs) -> Outcome<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.ground_truth.is_some() {
        cfg.ground_truth_dir.clone_from(&args.ground_truth);
    }
    if args.puzzle_spec.is_some() {
        cfg.puzzle_spec.clone_from(&args.puzzle_spec);
    }
    let out = match (&args.out, &args.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => cfg.output_dir.join("eval"),
        (None, None) => return Err(Failure::config("no output directory (pass --out or --config)")),
    };
    cfg.validate()?;
    let spec = cfg.puzzle()?;
    let truths = cfg.ground_truth()?;
    let names = spec.milestone_names();

    let trials = load_predictions(&args.predictions)?;
    let mut reports: Vec<Vec<MilestoneReport>> = Vec::with_capacity(trials.len());
    for (trial, preds) in &trials {
        reports.push(evaluate(&names, &truths, preds).data(format!("evaluating trial {trial}"))?);
    }
    let agg = aggregate(&reports).data("aggregating trials")?;

    for ((trial, _), report) in trials.iter().zip(&reports) {
        let path = out.join(format!("trial_{trial:02}.json"));
        let text = serde_json::to_string_pretty(report).expect("report serializes");
        write_atomic(&path, &text).data(format!("writing {}", path.display()))?;
    }
    let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write_atomic(&out.join("reports.json"), &text).data("writing reports.json")?;
    write_atomic(&out.join("aggregate.json"), &agg.to_json()).data("writing aggregate.json")?;
    let csv = agg.to_csv().data("aggregate csv")?;
    write_atomic(&out.join("aggregate.csv"), &csv).data("writing aggregate.csv")?;

    print!("{}", report::render(&reports, &agg));
    report::check_floor(&agg, args.floor)
}
