//! Experiment drivers: detection quality, signal ablation, the gate
//! threshold sweep, robustness under signal degradation and the scoring
//! microbenchmark.
//!
//! Signals depend only on a fix and its predecessors, so every experiment
//! evaluates the signal vectors of a corpus once ([`prepare`]) and then
//! recomposes scores under different masks and weightings. Work is spread
//! over traces with rayon; results keep corpus order, so reports are
//! byte-identical between runs.

pub mod ablation;
pub mod bench;
pub mod detection;
pub mod report;
pub mod robustness;
pub mod sweep;

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{StepUpOracle, Thresholds};
use crate::geo::{Label, Scenario, Trace};
use crate::scorer::{compose, redistribute_proportional, ProfileRows, ProfileTable, Scorer, WeightProfile};
use crate::signals::{SignalConfig, SignalContext, SignalSet, SignalVector};
use crate::tracegen::{rng_from_seed, stream_seed};

pub use ablation::{run_ablation, AblationResult};
pub use bench::{bench_scoring, BenchResult};
pub use detection::{run_detection, DetectionResult};
pub use report::{ExperimentReport, Table};
pub use robustness::{run_robustness, Condition, Degradation, RobustnessResult};
pub use sweep::{run_sweep, SweepResult};

/// Knobs shared by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Gate thresholds; `theta_p` is also the detection operating point.
    pub thresholds: Thresholds,
    pub oracle: StepUpOracle,
    /// Seeds the per-trace oracle streams.
    pub oracle_seed: u64,
    pub sweep_theta_p: Vec<f64>,
    /// Operating point for ablation F1.
    pub ablation_theta: f64,
    /// Operating point for the robustness study.
    pub robustness_theta: f64,
    pub degradation: Degradation,
    pub bench_iterations: usize,
    /// Rank individual fixes instead of traces for AUC-PR and EER.
    pub fix_level: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            oracle: StepUpOracle::default(),
            oracle_seed: 7,
            sweep_theta_p: vec![0.80, 0.90, 0.95],
            ablation_theta: 0.7,
            robustness_theta: 0.7,
            degradation: Degradation::default(),
            bench_iterations: 100_000,
            fix_level: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.oracle.validate()?;
        for &t in &self.sweep_theta_p {
            Thresholds::new(t, self.thresholds.theta_s)?;
        }
        for (name, t) in [("ablation_theta", self.ablation_theta), ("robustness_theta", self.robustness_theta)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {t}")));
            }
        }
        if self.bench_iterations < 10_000 {
            return Err(Error::InvalidConfig("bench_iterations must be at least 10000".into()));
        }
        self.degradation.validate()
    }
}

/// Scorer and experiment settings as recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot<'a> {
    pub signals: &'a SignalConfig,
    pub profiles: ProfileRows,
    pub experiment: &'a ExperimentConfig,
}

impl<'a> Snapshot<'a> {
    pub fn new(scorer: &'a Scorer, cfg: &'a ExperimentConfig) -> Self {
        Self {
            signals: &scorer.signals,
            profiles: scorer.profiles.into(),
            experiment: cfg,
        }
    }
}

/// Signal vectors of one labelled trace; entry `i` belongs to fix `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub session_id: String,
    pub label: Label,
    pub scenario: Option<Scenario>,
    pub vectors: Vec<SignalVector>,
}

/// Evaluates every scored fix of every trace once. Traces must be labelled.
pub fn prepare(traces: &[Trace], signals: &SignalConfig) -> Result<Vec<Prepared>> {
    signals.validate()?;
    traces
        .par_iter()
        .map(|trace| {
            let label = trace
                .label
                .ok_or_else(|| Error::MissingLabel(trace.session_id().to_owned()))?;
            let vectors = (1..trace.fixes.len())
                .map(|i| {
                    let cur = &trace.fixes[i];
                    let ctx = SignalContext::for_fix(cur, &trace.fixes[..i], signals.history_window);
                    signals.evaluate_all(cur, &ctx)
                })
                .collect::<Result<_>>()?;
            Ok(Prepared {
                session_id: trace.session_id().to_owned(),
                label,
                scenario: trace.scenario,
                vectors,
            })
        })
        .collect()
}

/// How weights are chosen for the signals that remain after masking.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    /// Deployment lookup: exact-match profiles, proportional fallback.
    Profiles(&'a ProfileTable),
    /// Always renormalize this base profile over the present signals.
    Proportional(&'a WeightProfile),
}

/// Trust scores of one trace under `mask`. Fixes left with no signals are
/// skipped.
pub fn trace_scores(p: &Prepared, mask: SignalSet, weighting: Weighting<'_>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(p.vectors.len());
    for v in &p.vectors {
        let v = v.restricted_to(mask);
        let present = v.present();
        if present.is_empty() {
            continue;
        }
        let t = match weighting {
            Weighting::Profiles(table) => compose(&v, &*table.select(present)?)?,
            Weighting::Proportional(base) => compose(&v, &redistribute_proportional(base, present)?)?,
        };
        out.push(t.value);
    }
    Ok(out)
}

/// Per-trace scores under one scoring variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub label: Label,
    pub scenario: Option<Scenario>,
    pub scores: Vec<f64>,
}

impl Evaluated {
    /// Lowest score; a trace with no scored fixes counts as fully trusted.
    pub fn min_score(&self) -> f64 {
        self.scores.iter().copied().reduce(f64::min).unwrap_or(1.0)
    }
}

pub fn evaluate(prepared: &[Prepared], mask: SignalSet, weighting: Weighting<'_>) -> Result<Vec<Evaluated>> {
    prepared
        .par_iter()
        .map(|p| {
            Ok(Evaluated {
                label: p.label,
                scenario: p.scenario,
                scores: trace_scores(p, mask, weighting)?,
            })
        })
        .collect()
}

/// Mean over every scored fix of the selected traces; `None` when empty.
pub fn mean_score<'a>(traces: impl IntoIterator<Item = &'a Evaluated>) -> Option<f64> {
    let (sum, n) = traces
        .into_iter()
        .flat_map(|e| e.scores.iter())
        .fold((0.0, 0usize), |(s, n), &t| (s + t, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Independent oracle stream for trace `index`.
pub fn oracle_rng(seed: u64, index: usize) -> ChaCha12Rng {
    rng_from_seed(stream_seed("oracle", seed, index as u64, 0))
}

pub(crate) fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

pub(crate) fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::{run_scores, run_trace, GateMode};

    #[test]
    fn prepared_scores_match_direct_scoring() {
        let scorer = Scorer::default();
        let traces = &testutil::corpus()[..40];
        let prepared = prepare(traces, &scorer.signals).unwrap();
        for (trace, p) in traces.iter().zip(&prepared) {
            let fast = trace_scores(p, SignalSet::ALL, Weighting::Profiles(&scorer.profiles)).unwrap();
            let direct: Vec<f64> = (1..trace.fixes.len())
                .map(|i| scorer.score_in_trace(&trace.fixes, i).unwrap().value)
                .collect();
            assert_eq!(fast, direct);
        }
    }

    #[test]
    fn gating_precomputed_scores_matches_run_trace() {
        let scorer = Scorer::default();
        let traces = testutil::corpus();
        let prepared = prepare(traces, &scorer.signals).unwrap();
        let oracle = StepUpOracle::new(0.6, 0.3).unwrap();
        for theta_p in [0.7, 0.95] {
            let th = Thresholds::new(theta_p, 0.3).unwrap();
            for mode in [GateMode::Binary, GateMode::Graduated] {
                for (i, (trace, p)) in traces.iter().zip(&prepared).enumerate() {
                    let scores = trace_scores(p, SignalSet::ALL, Weighting::Profiles(&scorer.profiles)).unwrap();
                    let a = run_trace(trace, &scorer, &th, mode, &oracle, &mut oracle_rng(1, i)).unwrap();
                    let b = run_scores(&p.session_id, Some(p.label), &scores, &th, mode, &oracle, &mut oracle_rng(1, i))
                        .unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn unlabelled_traces_rejected() {
        let mut t = testutil::corpus()[0].clone();
        t.label = None;
        t.scenario = None;
        assert!(matches!(prepare(&[t], &SignalConfig::default()), Err(Error::MissingLabel(_))));
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = ExperimentConfig {
            sweep_theta_p: vec![0.2],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            bench_iterations: 10,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
