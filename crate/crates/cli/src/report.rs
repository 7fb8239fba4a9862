use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;
use milestone_core::evaluation::{accuracy, aggregate, AggregateReport, MilestoneReport};

use crate::fail::{Failure, Outcome, Tag};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// An `eval` output directory or its `reports.json`.
    pub input: PathBuf,
    /// Fail with exit code 2 if any milestone's mean accuracy is below this.
    #[arg(long)]
    pub floor: Option<f64>,
}

/// One trial prints its counts; several print mean counts with accuracy mean
/// and standard deviation.
pub fn render(reports: &[Vec<MilestoneReport>], agg: &AggregateReport) -> String {
    let mut out = String::new();
    if let [single] = reports {
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>5} {:>5} {:>4} {:>6}",
            "milestone", "TN+TP", "FP-t", "FP-s", "FN", "Acc"
        );
        for r in single {
            let c = &r.counts;
            let acc = accuracy(c).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>5} {:>5} {:>4} {:>6.2}",
                r.milestone,
                c.tn + c.tp,
                c.fp_team,
                c.fp_sentence,
                c.fn_,
                acc
            );
        }
        return out;
    }
    let _ = writeln!(out, "{} trials", agg.n_trials);
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>6} {:>6} {:>6}",
        "milestone", "Acc", "std", "FP-s", "FP-t", "FN"
    );
    for r in &agg.rows {
        let _ = writeln!(
            out,
            "{:<12} {:>8.3} {:>8.3} {:>6.1} {:>6.1} {:>6.1}",
            r.milestone, r.acc_mean, r.acc_std, r.fp_s_mean, r.fp_t_mean, r.fn_mean
        );
    }
    out
}

pub fn check_floor(agg: &AggregateReport, floor: Option<f64>) -> Outcome<()> {
    let Some(floor) = floor else {
        return Ok(());
    };
    let low = agg.below_floor(floor);
    if low.is_empty() {
        Ok(())
    } else {
        Err(Failure::data(format!("accuracy below {floor} for: {}", low.join(", "))))
    }
}

pub fn run(args: &ReportArgs) -> Outcome<()> {
    let path = if args.input.is_dir() {
        args.input.join("reports.json")
    } else {
        args.input.clone()
    };
    let text = std::fs::read_to_string(&path).data(format!("reading {}", path.display()))?;
    let mut reports: Vec<Vec<MilestoneReport>> =
        serde_json::from_str(&text).data(format!("parsing {}", path.display()))?;
    for r in reports.iter_mut().flatten() {
        r.accuracy = accuracy(&r.counts).data(format!("milestone {}", r.milestone))?;
    }
    let agg = aggregate(&reports).data("aggregating trials")?;
    print!("{}", render(&reports, &agg));
    check_floor(&agg, args.floor)
}
