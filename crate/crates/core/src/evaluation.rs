//! Two-level scoring of predictions: did the team reach the milestone, and if
//! so, did the prediction point at a valid sentence.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{BaselineResult, RankedCandidate};
use crate::detector::{DetectionResult, MilestoneDetection};
use crate::transcript::{GroundTruth, MilestoneTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Tp,
    Tn,
    Fn,
    FpTeam,
    FpSentence,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Tp,
        Outcome::Tn,
        Outcome::Fn,
        Outcome::FpTeam,
        Outcome::FpSentence,
    ];
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Tp => "TP",
            Outcome::Tn => "TN",
            Outcome::Fn => "FN",
            Outcome::FpTeam => "FP_TEAM",
            Outcome::FpSentence => "FP_SENTENCE",
        })
    }
}

/// What a method claimed for one milestone of one team.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Prediction {
    Empty,
    Resolved(usize),
    /// A sentence that maps to no utterance, hallucinated or not.
    Unresolved(String),
    /// Ranked top-k utterance ids.
    Proposals(Vec<usize>),
}

impl Prediction {
    pub fn is_empty(&self) -> bool {
        match self {
            Prediction::Empty => true,
            Prediction::Resolved(_) => false,
            Prediction::Unresolved(s) => s.trim().is_empty(),
            Prediction::Proposals(ids) => ids.is_empty(),
        }
    }

    fn contains_any(&self, valid: &std::collections::BTreeSet<usize>) -> bool {
        match self {
            Prediction::Resolved(id) => valid.contains(id),
            Prediction::Proposals(ids) => ids.iter().any(|id| valid.contains(id)),
            Prediction::Empty | Prediction::Unresolved(_) => false,
        }
    }

    pub fn from_detection(d: &MilestoneDetection) -> Self {
        if d.is_empty() {
            Prediction::Empty
        } else if let Some(r) = &d.resolved {
            Prediction::Resolved(r.utterance_id)
        } else {
            Prediction::Unresolved(d.raw_sentence.clone())
        }
    }

    pub fn from_proposals(proposals: &[RankedCandidate]) -> Self {
        if proposals.is_empty() {
            Prediction::Empty
        } else {
            Prediction::Proposals(proposals.iter().map(|c| c.utterance_id).collect())
        }
    }
}

pub fn classify(prediction: &Prediction, truth: &MilestoneTruth) -> Outcome {
    match (truth.achieved, prediction.is_empty()) {
        (false, true) => Outcome::Tn,
        (true, true) => Outcome::Fn,
        (false, false) => Outcome::FpTeam,
        (true, false) if prediction.contains_any(&truth.valid_utterance_ids) => Outcome::Tp,
        (true, false) => Outcome::FpSentence,
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("accuracy is undefined for zero outcomes")]
    NoOutcomes,
    #[error("no trials to aggregate")]
    NoTrials,
    #[error("trial {trial} covers milestones {found:?}, expected {expected:?}")]
    MilestoneMismatch {
        trial: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("team {0} has predictions but no ground truth")]
    UnknownTeam(String),
    #[error("team {0} has ground truth but no predictions")]
    MissingTeam(String),
    #[error("team {team}: milestone `{milestone}` is missing from {side}")]
    MissingMilestone {
        team: String,
        milestone: String,
        side: &'static str,
    },
    #[error("team {0} appears more than once")]
    DuplicateTeam(String),
    #[error("writing report: {0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub tp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp_team: usize,
    pub fp_sentence: usize,
}

impl OutcomeCounts {
    pub fn new(tp: usize, tn: usize, fn_: usize, fp_team: usize, fp_sentence: usize) -> Self {
        Self {
            tp,
            tn,
            fn_,
            fp_team,
            fp_sentence,
        }
    }

    pub fn add(&mut self, outcome: Outcome) {
        *self.slot(outcome) += 1;
    }

    fn slot(&mut self, outcome: Outcome) -> &mut usize {
        match outcome {
            Outcome::Tp => &mut self.tp,
            Outcome::Tn => &mut self.tn,
            Outcome::Fn => &mut self.fn_,
            Outcome::FpTeam => &mut self.fp_team,
            Outcome::FpSentence => &mut self.fp_sentence,
        }
    }

    pub fn get(&self, outcome: Outcome) -> usize {
        match outcome {
            Outcome::Tp => self.tp,
            Outcome::Tn => self.tn,
            Outcome::Fn => self.fn_,
            Outcome::FpTeam => self.fp_team,
            Outcome::FpSentence => self.fp_sentence,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fn_ + self.fp_team + self.fp_sentence
    }
}

impl FromIterator<Outcome> for OutcomeCounts {
    fn from_iter<I: IntoIterator<Item = Outcome>>(iter: I) -> Self {
        let mut c = Self::default();
        iter.into_iter().for_each(|o| c.add(o));
        c
    }
}

/// (TN + TP) / (FP_team + FP_sentence + FN + TN + TP)
pub fn accuracy(counts: &OutcomeCounts) -> Result<f64, EvalError> {
    let total = counts.total();
    if total == 0 {
        return Err(EvalError::NoOutcomes);
    }
    Ok((counts.tp + counts.tn) as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneReport {
    pub milestone: String,
    pub counts: OutcomeCounts,
    pub accuracy: f64,
    pub n_teams: usize,
    /// Per-team outcome, keyed by team id.
    pub outcomes: BTreeMap<String, Outcome>,
}

/// One team's predictions for every milestone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamPredictions {
    pub team_id: String,
    pub milestones: IndexMap<String, Prediction>,
}

impl TeamPredictions {
    pub fn from_detection(r: &DetectionResult) -> Self {
        Self {
            team_id: r.team_id.clone(),
            milestones: r
                .milestones
                .iter()
                .map(|(k, d)| (k.clone(), Prediction::from_detection(d)))
                .collect(),
        }
    }

    pub fn from_baseline(r: &BaselineResult) -> Self {
        Self {
            team_id: r.team_id.clone(),
            milestones: r
                .proposals
                .iter()
                .map(|(k, p)| (k.clone(), Prediction::from_proposals(p)))
                .collect(),
        }
    }
}

/// Scores one trial: every team with ground truth must have predictions for
/// every milestone in `milestones`, and vice versa.
pub fn evaluate(
    milestones: &[String],
    truths: &[GroundTruth],
    predictions: &[TeamPredictions],
) -> Result<Vec<MilestoneReport>, EvalError> {
    let mut by_team: BTreeMap<&str, &TeamPredictions> = BTreeMap::new();
    for p in predictions {
        if by_team.insert(&p.team_id, p).is_some() {
            return Err(EvalError::DuplicateTeam(p.team_id.clone()));
        }
        if !truths.iter().any(|t| t.team_id == p.team_id) {
            return Err(EvalError::UnknownTeam(p.team_id.clone()));
        }
    }

    let mut reports = Vec::with_capacity(milestones.len());
    for name in milestones {
        let mut outcomes = BTreeMap::new();
        for truth in truths {
            let pred = by_team
                .get(truth.team_id.as_str())
                .ok_or_else(|| EvalError::MissingTeam(truth.team_id.clone()))?;
            let missing = |side| EvalError::MissingMilestone {
                team: truth.team_id.clone(),
                milestone: name.clone(),
                side,
            };
            let t = truth.milestone(name).ok_or_else(|| missing("ground truth"))?;
            let p = pred.milestones.get(name).ok_or_else(|| missing("predictions"))?;
            if outcomes.insert(truth.team_id.clone(), classify(p, t)).is_some() {
                return Err(EvalError::DuplicateTeam(truth.team_id.clone()));
            }
        }
        let counts: OutcomeCounts = outcomes.values().copied().collect();
        reports.push(MilestoneReport {
            milestone: name.clone(),
            accuracy: accuracy(&counts)?,
            n_teams: counts.total(),
            counts,
            outcomes,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub milestone: String,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub fp_s_mean: f64,
    pub fp_t_mean: f64,
    pub fn_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_trials: usize,
    pub rows: Vec<AggregateRow>,
}

/// Mean shifted by the first value, so identical inputs return that value exactly.
fn mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator), 0 for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn aggregate(trials: &[Vec<MilestoneReport>]) -> Result<AggregateReport, EvalError> {
    let first = trials.first().ok_or(EvalError::NoTrials)?;
    let names: Vec<String> = first.iter().map(|r| r.milestone.clone()).collect();
    for (i, t) in trials.iter().enumerate() {
        let found: Vec<String> = t.iter().map(|r| r.milestone.clone()).collect();
        if found != names {
            return Err(EvalError::MilestoneMismatch {
                trial: i,
                expected: names,
                found,
            });
        }
    }
    let rows = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column = |f: &dyn Fn(&MilestoneReport) -> f64| trials.iter().map(|t| f(&t[j])).collect::<Vec<f64>>();
            let acc = column(&|r| r.accuracy);
            AggregateRow {
                milestone: name.clone(),
                acc_mean: mean(&acc),
                acc_std: sample_std(&acc),
                fp_s_mean: mean(&column(&|r| r.counts.fp_sentence as f64)),
                fp_t_mean: mean(&column(&|r| r.counts.fp_team as f64)),
                fn_mean: mean(&column(&|r| r.counts.fn_ as f64)),
            }
        })
        .collect();
    Ok(AggregateReport {
        n_trials: trials.len(),
        rows,
    })
}

impl AggregateReport {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| EvalError::Write(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Write(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Write(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Milestones whose mean accuracy is below `floor`.
    pub fn below_floor(&self, floor: f64) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.acc_mean < floor)
            .map(|r| r.milestone.as_str())
            .collect()
    }
}
