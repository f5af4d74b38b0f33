//! Binary versus graduated gate across a sweep of proceed thresholds.

use rayon::prelude::*;
use serde::Serialize;

use super::report::{ExperimentReport, Table};
use super::{fmt4, oracle_rng, pct, prepare, trace_scores, ExperimentConfig, Snapshot, Weighting};
use crate::error::Result;
use crate::gate::{run_scores, GateMode, Thresholds};
use crate::geo::Trace;
use crate::metrics::{far_fdr, GateMetrics};
use crate::scorer::Scorer;
use crate::signals::SignalSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta_p: f64,
    pub mode: GateMode,
    pub metrics: GateMetrics,
    /// Share of all traces that were escalated to step-up at least once.
    pub step_up_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub theta_s: f64,
    pub rows: Vec<SweepRow>,
}

pub fn run_sweep(traces: &[Trace], scorer: &Scorer, cfg: &ExperimentConfig) -> Result<SweepResult> {
    let prepared = prepare(traces, &scorer.signals)?;
    let scores = prepared
        .par_iter()
        .map(|p| trace_scores(p, SignalSet::ALL, Weighting::Profiles(&scorer.profiles)))
        .collect::<Result<Vec<_>>>()?;
    let theta_s = cfg.thresholds.theta_s;
    let mut rows = Vec::new();
    for &theta_p in &cfg.sweep_theta_p {
        let th = Thresholds::new(theta_p, theta_s)?;
        for mode in [GateMode::Binary, GateMode::Graduated] {
            let outcomes = prepared
                .par_iter()
                .zip(&scores)
                .enumerate()
                .map(|(i, (p, s))| {
                    let o = run_scores(&p.session_id, Some(p.label), s, &th, mode, &cfg.oracle, &mut oracle_rng(cfg.oracle_seed, i))?;
                    Ok((p.label, o.disposition))
                })
                .collect::<Result<Vec<_>>>()?;
            let escalated = outcomes.iter().filter(|(_, d)| d.stepped_up()).count();
            rows.push(SweepRow {
                theta_p,
                mode,
                metrics: far_fdr(&outcomes)?,
                step_up_volume: escalated as f64 / outcomes.len() as f64,
            });
        }
    }
    Ok(SweepResult { theta_s, rows })
}

impl SweepResult {
    pub fn row(&self, theta_p: f64, mode: GateMode) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.theta_p == theta_p && r.mode == mode)
    }

    pub fn to_report(&self, scorer: &Scorer, cfg: &ExperimentConfig) -> ExperimentReport {
        let mut t = Table::new(
            "gate",
            &format!("Binary vs graduated gate (theta_s = {:.2})", self.theta_s),
            &["theta_p", "mode", "far", "fdr", "precision", "f1", "step_up_volume"],
        );
        for r in &self.rows {
            t.push(vec![
                format!("{:.2}", r.theta_p),
                r.mode.as_str().into(),
                pct(r.metrics.far),
                pct(r.metrics.fdr),
                fmt4(r.metrics.precision),
                fmt4(r.metrics.f1),
                pct(r.step_up_volume),
            ]);
        }
        ExperimentReport::new("sweep", &Snapshot::new(scorer, cfg), vec![t])
    }
}
