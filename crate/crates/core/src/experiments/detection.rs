//! Detection quality: per-scenario mean trust, class score distributions,
//! and AUC-PR / EER of the full scorer against the three-signal V1 baseline.

use serde::Serialize;

use super::report::{ExperimentReport, Table};
use super::{evaluate, fmt4, mean_score, prepare, Evaluated, ExperimentConfig, Snapshot, Weighting};
use crate::error::Result;
use crate::geo::{Label, Scenario, Trace};
use crate::metrics::{auc_pr, confusion, eer, precision_recall_f1, summarize, ScoredTrace, Summary};
use crate::scorer::{ProfileTable, Scorer};
use crate::signals::SignalSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub scenario: Scenario,
    pub traces: usize,
    pub mean_v2: f64,
    pub mean_v1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ranking {
    pub auc_pr: f64,
    pub eer: f64,
    /// F1 when flagging traces whose minimum score is below `theta_p`.
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub scenarios: Vec<ScenarioRow>,
    pub v1: Ranking,
    pub v2: Ranking,
    /// Per-fix V2 score distribution by class.
    pub legitimate: Summary,
    pub spoofed: Summary,
    pub theta: f64,
}

fn ranking(evaluated: &[Evaluated], theta: f64, fix_level: bool) -> Result<Ranking> {
    let (scores, positive): (Vec<f64>, Vec<bool>) = if fix_level {
        evaluated
            .iter()
            .flat_map(|e| e.scores.iter().map(move |t| (1.0 - t, e.label.is_spoofed())))
            .unzip()
    } else {
        evaluated.iter().map(|e| (1.0 - e.min_score(), e.label.is_spoofed())).unzip()
    };
    let scored = evaluated
        .iter()
        .map(|e| ScoredTrace::new(e.label, e.min_score()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ranking {
        auc_pr: auc_pr(&scores, &positive)?,
        eer: eer(&scores, &positive)?,
        f1: precision_recall_f1(&confusion(&scored, theta)?).f1,
    })
}

fn class_summary(evaluated: &[Evaluated], label: Label) -> Result<Summary> {
    let values: Vec<f64> = evaluated
        .iter()
        .filter(|e| e.label == label)
        .flat_map(|e| e.scores.iter().copied())
        .collect();
    summarize(&values)
}

pub fn run_detection(traces: &[Trace], scorer: &Scorer, cfg: &ExperimentConfig) -> Result<DetectionResult> {
    let prepared = prepare(traces, &scorer.signals)?;
    let v2 = evaluate(&prepared, SignalSet::ALL, Weighting::Profiles(&scorer.profiles))?;
    let v1 = evaluate(&prepared, ProfileTable::v1_signals(), Weighting::Profiles(&scorer.profiles))?;
    let theta = cfg.thresholds.theta_p;

    let scenarios = Scenario::ALL
        .into_iter()
        .filter_map(|s| {
            let pick = |all: &'_ [Evaluated]| -> Vec<Evaluated> {
                all.iter().filter(|e| e.scenario == Some(s)).cloned().collect()
            };
            let (a, b) = (pick(&v2), pick(&v1));
            Some(ScenarioRow {
                scenario: s,
                traces: a.len(),
                mean_v2: mean_score(&a)?,
                mean_v1: mean_score(&b)?,
            })
        })
        .collect();

    Ok(DetectionResult {
        scenarios,
        v1: ranking(&v1, theta, cfg.fix_level)?,
        v2: ranking(&v2, theta, cfg.fix_level)?,
        legitimate: class_summary(&v2, Label::Legitimate)?,
        spoofed: class_summary(&v2, Label::Spoofed)?,
        theta,
    })
}

impl DetectionResult {
    pub fn scenario(&self, s: Scenario) -> Option<&ScenarioRow> {
        self.scenarios.iter().find(|r| r.scenario == s)
    }

    pub fn to_report(&self, scorer: &Scorer, cfg: &ExperimentConfig) -> ExperimentReport {
        let mut scen = Table::new("scenarios", "Mean trust score by scenario", &["label", "scenario", "traces", "mean_T_v2", "mean_T_v1"]);
        for r in &self.scenarios {
            scen.push(vec![
                r.scenario.label().as_str().into(),
                r.scenario.as_str().into(),
                r.traces.to_string(),
                fmt4(r.mean_v2),
                fmt4(r.mean_v1),
            ]);
        }
        let mut cls = Table::new(
            "classification",
            "Classification summary",
            &["variant", "auc_pr", "eer", &format!("f1_at_{:.2}", self.theta)],
        );
        for (name, r) in [("V1", self.v1), ("V2", self.v2)] {
            cls.push(vec![name.into(), fmt4(r.auc_pr), fmt4(r.eer), fmt4(r.f1)]);
        }
        let mut dist = Table::new("distribution", "Per-fix trust score distribution (V2)", &["class", "fixes", "mean", "min", "p25", "max"]);
        for (name, s) in [("legitimate", self.legitimate), ("spoofed", self.spoofed)] {
            dist.push(vec![name.into(), s.count.to_string(), fmt4(s.mean), fmt4(s.min), fmt4(s.p25), fmt4(s.max)]);
        }
        ExperimentReport::new("detection", &Snapshot::new(scorer, cfg), vec![scen, cls, dist])
    }
}
