//! Classification and gate metrics.
//!
//! The positive class is always `spoofed`. Ranking metrics take a suspicion
//! score per trace (higher means more likely spoofed); the gate uses
//! `1 - min T` over the trace's scored fixes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gate::Disposition;
use crate::geo::Label;

/// One trace reduced to what the metrics need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredTrace {
    pub label: Label,
    /// Lowest trust score over the trace's scored fixes.
    pub min_score: f64,
}

impl ScoredTrace {
    pub fn new(label: Label, min_score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_score) {
            return Err(Error::InvalidScore(min_score));
        }
        Ok(Self { label, min_score })
    }

    /// Suspicion: `1 - min T`.
    pub fn detector_score(&self) -> f64 {
        1.0 - self.min_score
    }
}

/// Suspicion scores and positive-class flags, in matching order.
pub fn ranking_inputs(scored: &[ScoredTrace]) -> (Vec<f64>, Vec<bool>) {
    scored.iter().map(|s| (s.detector_score(), s.label.is_spoofed())).unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, spoofed: bool, flagged: bool) {
        match (spoofed, flagged) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Flags a trace when its minimum trust score falls below `theta`.
pub fn confusion(scored: &[ScoredTrace], theta: f64) -> Result<Confusion> {
    if scored.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = Confusion::default();
    for s in scored {
        c.record(s.label.is_spoofed(), s.min_score < theta);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1. Any ratio with a zero denominator is 0, and F1
/// is 0 when precision and recall are both 0.
pub fn precision_recall_f1(c: &Confusion) -> Prf {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

fn check_ranking(scores: &[f64], positive: &[bool]) -> Result<usize> {
    if scores.len() != positive.len() {
        return Err(Error::InvalidConfig(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidScore(bad));
    }
    let p = positive.iter().filter(|&&b| b).count();
    if p == 0 || p == positive.len() {
        return Err(Error::SingleClass);
    }
    Ok(p)
}

/// Cumulative (true, false) positive counts after each distinct score,
/// walking from the most to the least suspicious.
fn operating_points(scores: &[f64], positive: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if positive[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push((tp, fp));
        }
    }
    points
}

/// Area under the precision-recall curve with step interpolation (average
/// precision). Tied scores enter the curve together.
pub fn auc_pr(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let p = check_ranking(scores, positive)? as f64;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in operating_points(scores, positive) {
        let recall = tp as f64 / p;
        area += (recall - prev_recall) * tp as f64 / (tp + fp) as f64;
        prev_recall = recall;
    }
    Ok(area)
}

/// Equal-error rate: where the false-positive and false-negative rates
/// cross as the threshold sweeps down. Between two adjacent thresholds the
/// rates are interpolated linearly.
pub fn eer(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let p = check_ranking(scores, positive)? as f64;
    let n = scores.len() as f64 - p;
    let (mut fpr0, mut fnr0) = (0.0, 1.0);
    for (tp, fp) in operating_points(scores, positive) {
        let (fpr1, fnr1) = (fp as f64 / n, 1.0 - tp as f64 / p);
        let d1 = fpr1 - fnr1;
        if d1 >= 0.0 {
            let d0 = fpr0 - fnr0;
            if d1 == d0 {
                return Ok(fpr1);
            }
            let a = -d0 / (d1 - d0);
            return Ok(fpr0 + a * (fpr1 - fpr0));
        }
        (fpr0, fnr0) = (fpr1, fnr1);
    }
    unreachable!("the last operating point has FPR = 1 and FNR = 0")
}

/// Gate-level error rates over final trace dispositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateMetrics {
    /// Accepted spoofed / spoofed; 0 when there are no spoofed traces.
    pub far: f64,
    /// Denied legitimate / legitimate; 0 when there are no legitimate traces.
    pub fdr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub spoofed: usize,
    pub legitimate: usize,
    /// False when `far` is a placeholder because no spoofed traces were seen.
    pub far_defined: bool,
    pub fdr_defined: bool,
}

/// Stepped-up-then-accepted counts as accepted, stepped-up-then-denied as
/// denied.
pub fn far_fdr(outcomes: &[(Label, Disposition)]) -> Result<GateMetrics> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = Confusion::default();
    for &(label, d) in outcomes {
        c.record(label.is_spoofed(), !d.is_accepted());
    }
    let prf = precision_recall_f1(&c);
    let spoofed = c.tp + c.fn_;
    let legitimate = c.fp + c.tn;
    Ok(GateMetrics {
        far: ratio(c.fn_, spoofed),
        fdr: ratio(c.fp, legitimate),
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        spoofed,
        legitimate,
        far_defined: spoofed > 0,
        fdr_defined: legitimate > 0,
    })
}

/// Mean, min, 25th percentile (nearest rank) and max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((0.25 * v.len() as f64).ceil() as usize).max(1);
    Ok(Summary {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
        p25: v[rank - 1],
        max: v[v.len() - 1],
    })
}
