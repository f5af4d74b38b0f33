//! Scorer behaviour when signals are missing or degraded.
//!
//! Six conditions: all signals; no network hint; no raw GPS samples; the
//! three-signal V1 set; degraded GPS (accuracy inflated with matching extra
//! noise); and intermittent fixes (every other fix dropped). Scores always use
//! the deployment profile lookup.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Table};
use super::{evaluate, fmt4, mean_score, pct, prepare, Evaluated, ExperimentConfig, Snapshot, Weighting};
use crate::error::{Error, Result};
use crate::geo::{Fix, Label, RawSample, Trace, EARTH_RADIUS_M};
use crate::metrics::{confusion, precision_recall_f1, ScoredTrace};
use crate::scorer::{ProfileTable, Scorer};
use crate::signals::{SignalId, SignalSet};
use crate::tracegen::{quantize, rng_from_seed, stream_seed};

/// How the degraded-GPS condition perturbs a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Degradation {
    /// Reported accuracies are multiplied by this factor.
    pub accuracy_factor: f64,
    /// Std of a slowly varying position bias, as a fraction of the original
    /// accuracy, applied to the fix and its raw samples alike.
    pub bias_ratio: f64,
    /// AR(1) coefficient of that bias from one fix to the next.
    pub bias_correlation: f64,
    /// Std of extra white noise on each raw sample, as a fraction of the
    /// original accuracy, so that scatter grows with the reported accuracy.
    pub raw_noise_ratio: f64,
    pub seed: u64,
}

impl Default for Degradation {
    fn default() -> Self {
        Self {
            accuracy_factor: 4.0,
            bias_ratio: 0.5,
            bias_correlation: 0.99,
            raw_noise_ratio: 0.9,
            seed: 11,
        }
    }
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        let ok = self.accuracy_factor >= 1.0
            && self.accuracy_factor.is_finite()
            && self.bias_ratio >= 0.0
            && self.raw_noise_ratio >= 0.0
            && (0.0..1.0).contains(&self.bias_correlation);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid degradation settings {self:?}")))
        }
    }
}

fn shift(lat: f64, lon: f64, east: f64, north: f64) -> (f64, f64) {
    let lat2 = (lat + (north / EARTH_RADIUS_M).to_degrees()).clamp(-90.0, 90.0);
    let lon2 = lon + (east / (EARTH_RADIUS_M * lat.to_radians().cos().max(1e-6))).to_degrees();
    let lon2 = (lon2 + 180.0).rem_euclid(360.0) - 180.0;
    (quantize(lat2), quantize(lon2))
}

/// Degraded copy of `trace`; deterministic in `(d.seed, index)`.
pub fn degrade(trace: &Trace, index: usize, d: &Degradation) -> Result<Trace> {
    let mut rng = rng_from_seed(stream_seed("degrade", d.seed, index as u64, 0));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let phi = d.bias_correlation;
    let innovation = (1.0 - phi * phi).sqrt();
    let (mut be, mut bn) = (unit.sample(&mut rng), unit.sample(&mut rng));
    let mut fixes = Vec::with_capacity(trace.fixes.len());
    for (k, f) in trace.fixes.iter().enumerate() {
        if k > 0 {
            be = phi * be + innovation * unit.sample(&mut rng);
            bn = phi * bn + innovation * unit.sample(&mut rng);
        }
        let scale = d.bias_ratio * f.accuracy;
        let (lat, lon) = shift(f.lat, f.lon, be * scale, bn * scale);
        let raw_fixes = f.raw_fixes.as_ref().map(|raw| {
            raw.iter()
                .map(|s| {
                    let sd = d.raw_noise_ratio * s.accuracy;
                    let (e, n) = (unit.sample(&mut rng) * sd, unit.sample(&mut rng) * sd);
                    let (lat, lon) = shift(s.lat, s.lon, be * scale + e, bn * scale + n);
                    RawSample {
                        lat,
                        lon,
                        accuracy: quantize(s.accuracy * d.accuracy_factor),
                    }
                })
                .collect()
        });
        fixes.push(Fix {
            lat,
            lon,
            accuracy: quantize(f.accuracy * d.accuracy_factor),
            raw_fixes,
            ..f.clone()
        });
    }
    Trace::new(fixes, trace.label, trace.scenario, trace.seed)
}

/// Keeps every other fix. Raw samples collected since the last kept fix
/// stay in the buffer of the next kept one.
pub fn thin(trace: &Trace) -> Result<Trace> {
    let mut fixes = Vec::with_capacity(trace.fixes.len().div_ceil(2));
    for (k, f) in trace.fixes.iter().enumerate().step_by(2) {
        let mut f = f.clone();
        if k > 0 {
            if let (Some(prev), Some(cur)) = (&trace.fixes[k - 1].raw_fixes, &f.raw_fixes) {
                f.raw_fixes = Some(prev.iter().chain(cur).copied().collect());
            }
        }
        fixes.push(f);
    }
    Trace::new(fixes, trace.label, trace.scenario, trace.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    AllSignals,
    NoNetwork,
    NoGpsFixes,
    V1Fallback,
    DegradedGps,
    IntermittentFixes,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::AllSignals,
        Condition::NoNetwork,
        Condition::NoGpsFixes,
        Condition::V1Fallback,
        Condition::DegradedGps,
        Condition::IntermittentFixes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::AllSignals => "all signals",
            Condition::NoNetwork => "no network (S5)",
            Condition::NoGpsFixes => "no GPS fixes (S4)",
            Condition::V1Fallback => "V1 fallback",
            Condition::DegradedGps => "degraded GPS",
            Condition::IntermittentFixes => "intermittent fixes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub condition: Condition,
    pub mean_legitimate: f64,
    pub mean_spoofed: f64,
    /// F1 when flagging traces whose minimum score is below theta.
    pub f1: f64,
    /// Share of legitimate traces a binary gate at theta would deny.
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessResult {
    pub theta: f64,
    pub rows: Vec<RobustnessRow>,
}

fn row(condition: Condition, evaluated: &[Evaluated], theta: f64) -> Result<RobustnessRow> {
    let scored = evaluated
        .iter()
        .map(|e| ScoredTrace::new(e.label, e.min_score()))
        .collect::<Result<Vec<_>>>()?;
    let c = confusion(&scored, theta)?;
    let legit = c.fp + c.tn;
    let mean = |label: Label| mean_score(evaluated.iter().filter(|e| e.label == label)).unwrap_or(f64::NAN);
    Ok(RobustnessRow {
        condition,
        mean_legitimate: mean(Label::Legitimate),
        mean_spoofed: mean(Label::Spoofed),
        f1: precision_recall_f1(&c).f1,
        fdr: if legit == 0 { 0.0 } else { c.fp as f64 / legit as f64 },
    })
}

pub fn run_robustness(traces: &[Trace], scorer: &Scorer, cfg: &ExperimentConfig) -> Result<RobustnessResult> {
    let theta = cfg.robustness_theta;
    let profiles = Weighting::Profiles(&scorer.profiles);
    let prepared = prepare(traces, &scorer.signals)?;
    let mut rows = Vec::with_capacity(6);
    for (condition, mask) in [
        (Condition::AllSignals, SignalSet::ALL),
        (Condition::NoNetwork, SignalSet::ALL.without(SignalId::S5Network)),
        (Condition::NoGpsFixes, SignalSet::ALL.without(SignalId::S4FixConsistency)),
        (Condition::V1Fallback, ProfileTable::v1_signals()),
    ] {
        rows.push(row(condition, &evaluate(&prepared, mask, profiles)?, theta)?);
    }

    let degraded = traces
        .par_iter()
        .enumerate()
        .map(|(i, t)| degrade(t, i, &cfg.degradation))
        .collect::<Result<Vec<_>>>()?;
    let evaluated = evaluate(&prepare(&degraded, &scorer.signals)?, SignalSet::ALL, profiles)?;
    rows.push(row(Condition::DegradedGps, &evaluated, theta)?);

    let thinned = traces.par_iter().map(thin).collect::<Result<Vec<_>>>()?;
    let evaluated = evaluate(&prepare(&thinned, &scorer.signals)?, SignalSet::ALL, profiles)?;
    rows.push(row(Condition::IntermittentFixes, &evaluated, theta)?);

    Ok(RobustnessResult { theta, rows })
}

impl RobustnessResult {
    pub fn row(&self, c: Condition) -> Option<&RobustnessRow> {
        self.rows.iter().find(|r| r.condition == c)
    }

    /// Condition with the lowest legitimate mean score.
    pub fn lowest_legitimate(&self) -> Option<Condition> {
        self.rows
            .iter()
            .min_by(|a, b| a.mean_legitimate.total_cmp(&b.mean_legitimate))
            .map(|r| r.condition)
    }

    pub fn to_report(&self, scorer: &Scorer, cfg: &ExperimentConfig) -> ExperimentReport {
        let mut t = Table::new(
            "conditions",
            &format!("Robustness under signal degradation (theta = {:.2})", self.theta),
            &["condition", "mean_T_legitimate", "mean_T_spoofed", "f1", "fdr"],
        );
        for r in &self.rows {
            t.push(vec![
                r.condition.as_str().into(),
                fmt4(r.mean_legitimate),
                fmt4(r.mean_spoofed),
                fmt4(r.f1),
                pct(r.fdr),
            ]);
        }
        ExperimentReport::new("robustness", &Snapshot::new(scorer, cfg), vec![t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::testutil;
    use crate::geo::{haversine_m, Position};

    #[test]
    fn thinning_keeps_every_other_fix_and_merges_raw() {
        let t = &testutil::corpus()[0];
        let thinned = thin(t).unwrap();
        assert_eq!(thinned.fixes.len(), 30);
        assert_eq!(thinned.fixes[1].t, t.fixes[2].t);
        let n0 = t.fixes[0].raw_fixes.as_ref().unwrap().len();
        assert_eq!(thinned.fixes[0].raw_fixes.as_ref().unwrap().len(), n0);
        assert_eq!(thinned.fixes[1].raw_fixes.as_ref().unwrap().len(), 2 * n0);
    }

    #[test]
    fn degradation_inflates_accuracy_and_is_deterministic() {
        let d = Degradation::default();
        let t = &testutil::corpus()[5];
        let a = degrade(t, 5, &d).unwrap();
        assert_eq!(a, degrade(t, 5, &d).unwrap());
        assert_ne!(a, degrade(t, 6, &d).unwrap());
        for (x, y) in a.fixes.iter().zip(&t.fixes) {
            assert!((x.accuracy - 4.0 * y.accuracy).abs() < 1e-6);
            assert!(haversine_m(x.lat_lon(), y.lat_lon()) < 4.0 * y.accuracy);
            assert_eq!(x.net_hint, y.net_hint);
        }
    }

    #[test]
    fn six_conditions() {
        let r = run_robustness(testutil::corpus(), &Scorer::default(), &ExperimentConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.rows.iter().all(|x| (0.0..=1.0).contains(&x.fdr)));
        assert_eq!(r.to_report(&Scorer::default(), &ExperimentConfig::default()).tables[0].rows.len(), 6);
    }
}
