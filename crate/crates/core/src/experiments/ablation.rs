//! Signal ablation over all 31 non-empty subsets, with exact Shapley
//! attribution of F1.
//!
//! Each subset is scored with the all-five profile renormalized over the
//! subset, so the ablation isolates signals rather than the hand-tuned
//! fallback profiles.

use serde::Serialize;

use super::report::{ExperimentReport, Table};
use super::{evaluate, fmt4, prepare, ExperimentConfig, Snapshot, Weighting};
use crate::error::Result;
use crate::geo::Trace;
use crate::metrics::{confusion, precision_recall_f1, ScoredTrace};
use crate::scorer::Scorer;
use crate::signals::{SignalId, SignalSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetRow {
    #[serde(serialize_with = "display")]
    pub signals: SignalSet,
    pub f1: f64,
}

fn display<S: serde::Serializer>(s: &SignalSet, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapleyRow {
    pub signal: SignalId,
    pub delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationResult {
    /// One row per non-empty subset, ordered by bitmask.
    pub subsets: Vec<SubsetRow>,
    /// One row per signal in S1..S5 order.
    pub shapley: Vec<ShapleyRow>,
    pub theta: f64,
}

/// Exact Shapley values of `value` over `n` players, with v(∅) given by
/// `value(SignalSet::EMPTY)`.
pub fn shapley(value: impl Fn(SignalSet) -> f64) -> [f64; 5] {
    let n = SignalId::ALL.len();
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut phi = [0.0; 5];
    for id in SignalId::ALL {
        for bits in 0u8..32 {
            let s = SignalSet::from_bits(bits);
            if s.contains(id) {
                continue;
            }
            let k = s.len();
            let weight = fact(k) * fact(n - k - 1) / fact(n);
            phi[id.index()] += weight * (value(s.with(id)) - value(s));
        }
    }
    phi
}

pub fn run_ablation(traces: &[Trace], scorer: &Scorer, cfg: &ExperimentConfig) -> Result<AblationResult> {
    let prepared = prepare(traces, &scorer.signals)?;
    let theta = cfg.ablation_theta;
    let base = scorer.profiles.all_five;
    let subsets = SignalSet::non_empty_subsets()
        .map(|s| {
            let evaluated = evaluate(&prepared, s, Weighting::Proportional(&base))?;
            let scored = evaluated
                .iter()
                .map(|e| ScoredTrace::new(e.label, e.min_score()))
                .collect::<Result<Vec<_>>>()?;
            let f1 = precision_recall_f1(&confusion(&scored, theta)?).f1;
            Ok(SubsetRow { signals: s, f1 })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = [0.0; 32];
    for r in &subsets {
        table[r.signals.bits() as usize] = r.f1;
    }
    let phi = shapley(|s| table[s.bits() as usize]);
    let shapley = SignalId::ALL
        .into_iter()
        .map(|signal| ShapleyRow {
            signal,
            delta_f1: phi[signal.index()],
        })
        .collect();
    Ok(AblationResult { subsets, shapley, theta })
}

impl AblationResult {
    pub fn f1(&self, s: SignalSet) -> Option<f64> {
        self.subsets.iter().find(|r| r.signals == s).map(|r| r.f1)
    }

    pub fn full_f1(&self) -> f64 {
        self.f1(SignalSet::ALL).unwrap_or(0.0)
    }

    /// Highest-F1 subset of exactly `size` signals; ties go to the lower mask.
    pub fn best_of_size(&self, size: usize) -> Option<SubsetRow> {
        self.best(|s| s.len() == size)
    }

    /// Highest-F1 subset with fewer than five signals.
    pub fn best_sparse(&self) -> Option<SubsetRow> {
        self.best(|s| s.len() < SignalId::ALL.len())
    }

    fn best(&self, keep: impl Fn(SignalSet) -> bool) -> Option<SubsetRow> {
        self.subsets
            .iter()
            .filter(|r| keep(r.signals))
            .fold(None, |best: Option<SubsetRow>, r| match best {
                Some(b) if b.f1 >= r.f1 => Some(b),
                _ => Some(*r),
            })
    }

    pub fn shapley_sum(&self) -> f64 {
        self.shapley.iter().map(|r| r.delta_f1).sum()
    }

    pub fn to_report(&self, scorer: &Scorer, cfg: &ExperimentConfig) -> ExperimentReport {
        let mut subsets = Table::new("subsets", &format!("F1 by signal subset (theta = {:.2})", self.theta), &["signals", "size", "f1"]);
        for r in &self.subsets {
            subsets.push(vec![r.signals.to_string(), r.signals.len().to_string(), fmt4(r.f1)]);
        }
        let mut importance = Table::new("importance", "Signal importance (Shapley delta F1)", &["signal", "description", "delta_f1"]);
        let mut ranked = self.shapley.clone();
        ranked.sort_by(|a, b| b.delta_f1.total_cmp(&a.delta_f1).then(a.signal.cmp(&b.signal)));
        for r in ranked {
            importance.push(vec![r.signal.tag().into(), r.signal.description().into(), format!("{:+.4}", r.delta_f1)]);
        }
        let mut best = Table::new("best", "Reference subsets", &["kind", "signals", "f1"]);
        for (kind, row) in [
            ("best pair", self.best_of_size(2)),
            ("best sparse", self.best_sparse()),
            ("all five", self.f1(SignalSet::ALL).map(|f1| SubsetRow { signals: SignalSet::ALL, f1 })),
        ] {
            if let Some(r) = row {
                best.push(vec![kind.into(), r.signals.to_string(), fmt4(r.f1)]);
            }
        }
        ExperimentReport::new("ablation", &Snapshot::new(scorer, cfg), vec![subsets, importance, best])
    }
}
