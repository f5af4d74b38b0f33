//! The five integrity signals.
//!
//! Each signal maps a fix and its context to a score in `[0, 1]`, where 1 is
//! fully plausible. A signal that lacks its inputs is reported as absent
//! rather than as a neutral value so that the scorer can reweight the
//! remaining signals.
//!
//! | id | name            | inputs                    |
//! |----|-----------------|---------------------------|
//! | S1 | movement        | previous fix              |
//! | S2 | accuracy        | the fix itself            |
//! | S3 | temporal        | history window            |
//! | S4 | fix consistency | raw receiver samples (≥3) |
//! | S5 | network         | cell / Wi-Fi hint         |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, speed_between, Fix, LatLon, NetworkHint, Position, RawSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignalId {
    S1Movement,
    S2Accuracy,
    S3Temporal,
    S4FixConsistency,
    S5Network,
}

impl SignalId {
    pub const ALL: [SignalId; 5] = [
        SignalId::S1Movement,
        SignalId::S2Accuracy,
        SignalId::S3Temporal,
        SignalId::S4FixConsistency,
        SignalId::S5Network,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short tag, `S1` .. `S5`.
    pub fn tag(self) -> &'static str {
        ["S1", "S2", "S3", "S4", "S5"][self.index()]
    }

    pub fn description(self) -> &'static str {
        match self {
            SignalId::S1Movement => "Movement plausibility",
            SignalId::S2Accuracy => "Accuracy anomaly",
            SignalId::S3Temporal => "Temporal consistency",
            SignalId::S4FixConsistency => "Fix consistency",
            SignalId::S5Network => "Network cross-check",
        }
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SignalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalId::ALL
            .into_iter()
            .find(|id| id.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown signal {s:?}")))
    }
}

/// A set of signals, stored as a 5-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SignalSet(u8);

impl SignalSet {
    pub const EMPTY: SignalSet = SignalSet(0);
    pub const ALL: SignalSet = SignalSet(0b1_1111);

    pub fn from_bits(bits: u8) -> Self {
        SignalSet(bits & Self::ALL.0)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, id: SignalId) -> bool {
        self.0 & (1 << id.index()) != 0
    }

    pub fn with(self, id: SignalId) -> Self {
        SignalSet(self.0 | (1 << id.index()))
    }

    pub fn without(self, id: SignalId) -> Self {
        SignalSet(self.0 & !(1 << id.index()))
    }

    pub fn intersect(self, other: SignalSet) -> Self {
        SignalSet(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: SignalSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = SignalId> {
        SignalId::ALL.into_iter().filter(move |id| self.contains(*id))
    }

    /// All 31 non-empty subsets of the five signals, ordered by bitmask.
    pub fn non_empty_subsets() -> impl Iterator<Item = SignalSet> {
        (1..=Self::ALL.0).map(SignalSet)
    }
}

impl FromIterator<SignalId> for SignalSet {
    fn from_iter<I: IntoIterator<Item = SignalId>>(iter: I) -> Self {
        iter.into_iter().fold(SignalSet::EMPTY, SignalSet::with)
    }
}

impl fmt::Display for SignalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let tags: Vec<_> = self.iter().map(SignalId::tag).collect();
        f.write_str(&tags.join("+"))
    }
}

/// Per-signal scores; `None` marks an unavailable signal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalVector([Option<f64>; 5]);

impl SignalVector {
    pub fn get(&self, id: SignalId) -> Option<f64> {
        self.0[id.index()]
    }

    pub fn set(&mut self, id: SignalId, score: Option<f64>) {
        self.0[id.index()] = score;
    }

    pub fn present(&self) -> SignalSet {
        self.iter().map(|(id, _)| id).collect()
    }

    /// Present signals with their scores.
    pub fn iter(&self) -> impl Iterator<Item = (SignalId, f64)> + '_ {
        SignalId::ALL
            .into_iter()
            .filter_map(move |id| self.0[id.index()].map(|s| (id, s)))
    }

    /// Copy that keeps only the signals in `keep`.
    pub fn restricted_to(&self, keep: SignalSet) -> SignalVector {
        let mut out = *self;
        for id in SignalId::ALL {
            if !keep.contains(id) {
                out.0[id.index()] = None;
            }
        }
        out
    }
}

impl From<[Option<f64>; 5]> for SignalVector {
    fn from(scores: [Option<f64>; 5]) -> Self {
        SignalVector(scores)
    }
}

/// Inputs to signal evaluation beyond the fix itself.
#[derive(Debug, Clone, Copy)]
pub struct SignalContext<'a> {
    /// Most recent prior fixes of the session, oldest first.
    pub history: &'a [Fix],
    pub net_hint: Option<&'a NetworkHint>,
    pub raw_fixes: Option<&'a [RawSample]>,
}

impl<'a> SignalContext<'a> {
    /// Context for `cur` with the last `window` fixes of `history`.
    pub fn for_fix(cur: &'a Fix, history: &'a [Fix], window: usize) -> Self {
        let start = history.len().saturating_sub(window);
        Self {
            history: &history[start..],
            net_hint: cur.net_hint.as_ref(),
            raw_fixes: cur.raw_fixes.as_deref(),
        }
    }
}

/// Knee points of the piecewise-linear signal curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    /// S1 is 1 at or below this speed (m/s).
    pub movement_full_speed: f64,
    /// S1 reaches 0 at this speed (m/s).
    pub movement_zero_speed: f64,
    /// S2 is 1 at or above this reported accuracy (m), linear to 0 below.
    pub accuracy_full_m: f64,
    /// S3 counts a pair as a teleport above this speed (m/s).
    pub teleport_speed: f64,
    /// S4 scatter/accuracy ratio band where the score is 1.
    pub consistency_low_ratio: f64,
    pub consistency_high_ratio: f64,
    /// S4 reaches 0 at this ratio.
    pub consistency_zero_ratio: f64,
    /// Minimum raw samples for S4 to be available.
    pub min_raw_samples: usize,
    /// S5 is 1 while the hint distance is within this many hint accuracies.
    pub network_full_ratio: f64,
    /// S5 reaches 0 at this many hint accuracies.
    pub network_zero_ratio: f64,
    /// History window length W.
    pub history_window: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            movement_full_speed: 50.0,
            movement_zero_speed: 100.0,
            accuracy_full_m: 2.0,
            teleport_speed: 100.0,
            consistency_low_ratio: 0.05,
            consistency_high_ratio: 3.0,
            consistency_zero_ratio: 10.0,
            min_raw_samples: 3,
            network_full_ratio: 3.0,
            network_zero_ratio: 10.0,
            history_window: 10,
        }
    }
}

/// 1 up to `full`, linear down to 0 at `zero`.
fn falling_ramp(x: f64, full: f64, zero: f64) -> f64 {
    if x <= full {
        1.0
    } else if x >= zero {
        0.0
    } else {
        (zero - x) / (zero - full)
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("signal constants: {what}")));
        let positive = [
            self.movement_full_speed,
            self.accuracy_full_m,
            self.teleport_speed,
            self.consistency_low_ratio,
            self.network_full_ratio,
        ];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return bad("knees must be positive and finite");
        }
        if self.movement_full_speed >= self.movement_zero_speed {
            return bad("movement_full_speed must be below movement_zero_speed");
        }
        if !(self.consistency_low_ratio < self.consistency_high_ratio
            && self.consistency_high_ratio < self.consistency_zero_ratio)
        {
            return bad("consistency ratios must increase low < high < zero");
        }
        if self.network_full_ratio >= self.network_zero_ratio {
            return bad("network_full_ratio must be below network_zero_ratio");
        }
        if self.history_window == 0 {
            return bad("history_window must be at least 1");
        }
        if self.min_raw_samples < 2 {
            return bad("min_raw_samples must be at least 2");
        }
        Ok(())
    }

    /// S1: penalizes the implied speed from the previous fix.
    pub fn movement(&self, prev: &Fix, cur: &Fix) -> Result<f64> {
        let v = speed_between(prev, cur)?;
        Ok(self.movement_from_speed(v))
    }

    pub fn movement_from_speed(&self, v: f64) -> f64 {
        falling_ramp(v, self.movement_full_speed, self.movement_zero_speed)
    }

    /// S2: implausibly small reported accuracy.
    pub fn accuracy(&self, cur: &Fix) -> Result<f64> {
        if !(cur.accuracy.is_finite() && cur.accuracy > 0.0) {
            return Err(Error::InvalidAccuracy(cur.accuracy));
        }
        Ok(self.accuracy_from_meters(cur.accuracy))
    }

    pub fn accuracy_from_meters(&self, accuracy: f64) -> f64 {
        (accuracy / self.accuracy_full_m).clamp(0.0, 1.0)
    }

    /// S3: share of consecutive pairs in `history + cur` that do not imply a
    /// teleport. `None` when there is no history.
    pub fn temporal(&self, cur: &Fix, history: &[Fix]) -> Result<Option<f64>> {
        let Some(last) = history.last() else {
            return Ok(None);
        };
        let mut violations = 0usize;
        for pair in history.windows(2) {
            if speed_between(&pair[0], &pair[1])? > self.teleport_speed {
                violations += 1;
            }
        }
        if speed_between(last, cur)? > self.teleport_speed {
            violations += 1;
        }
        let pairs = history.len();
        Ok(Some(1.0 - violations as f64 / pairs as f64))
    }

    /// Scatter of the raw samples around their centroid divided by their mean
    /// reported accuracy. `None` with too few samples.
    pub fn scatter_ratio(&self, raw: &[RawSample]) -> Option<f64> {
        if raw.len() < self.min_raw_samples {
            return None;
        }
        let n = raw.len() as f64;
        let centroid = LatLon {
            lat: raw.iter().map(|s| s.lat).sum::<f64>() / n,
            lon: raw.iter().map(|s| s.lon).sum::<f64>() / n,
        };
        let mean_sq = raw
            .iter()
            .map(|s| haversine_m(s.lat_lon(), centroid).powi(2))
            .sum::<f64>()
            / n;
        let mean_accuracy = raw.iter().map(|s| s.accuracy).sum::<f64>() / n;
        Some(mean_sq.sqrt() / mean_accuracy)
    }

    /// S4: raw-sample consistency. Too little scatter for the claimed accuracy
    /// looks simulated; too much looks injected.
    pub fn fix_consistency(&self, raw: &[RawSample]) -> Option<f64> {
        self.scatter_ratio(raw).map(|rho| self.consistency_from_ratio(rho))
    }

    pub fn consistency_from_ratio(&self, rho: f64) -> f64 {
        if rho < self.consistency_low_ratio {
            (rho / self.consistency_low_ratio).max(0.0)
        } else {
            falling_ramp(rho, self.consistency_high_ratio, self.consistency_zero_ratio)
        }
    }

    /// S5: distance from the network hint in units of hint accuracy.
    pub fn network(&self, cur: &Fix, hint: &NetworkHint) -> f64 {
        let d = haversine_m(cur.lat_lon(), hint.lat_lon());
        self.network_from_ratio(d / hint.accuracy)
    }

    pub fn network_from_ratio(&self, ratio: f64) -> f64 {
        falling_ramp(ratio, self.network_full_ratio, self.network_zero_ratio)
    }

    /// Evaluates every signal whose inputs are present.
    pub fn evaluate_all(&self, cur: &Fix, ctx: &SignalContext<'_>) -> Result<SignalVector> {
        let start = ctx.history.len().saturating_sub(self.history_window);
        let history = &ctx.history[start..];
        let mut v = SignalVector::default();
        if let Some(prev) = history.last() {
            v.set(SignalId::S1Movement, Some(self.movement(prev, cur)?));
        }
        v.set(SignalId::S2Accuracy, Some(self.accuracy(cur)?));
        v.set(SignalId::S3Temporal, self.temporal(cur, history)?);
        v.set(SignalId::S4FixConsistency, ctx.raw_fixes.and_then(|raw| self.fix_consistency(raw)));
        v.set(SignalId::S5Network, ctx.net_hint.map(|hint| self.network(cur, hint)));
        Ok(v)
    }
}
