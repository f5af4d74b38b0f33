//! Weight profiles and trust-score composition.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Fix;
use crate::signals::{SignalConfig, SignalContext, SignalId, SignalSet, SignalVector};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Scores are snapped to this grid so that summation order cannot move a
/// value across a threshold (0.3 + 0.1 + 0.15 + 0.25 must equal 0.8).
const SCORE_GRID: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    AllFive,
    NoNetwork,
    NoFixes,
    V1,
    /// Renormalized subset of another profile.
    Proportional,
    Custom,
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::AllFive => "all-five",
            ProfileName::NoNetwork => "no-network",
            ProfileName::NoFixes => "no-fixes",
            ProfileName::V1 => "v1",
            ProfileName::Proportional => "proportional",
            ProfileName::Custom => "custom",
        })
    }
}

/// Per-signal weights over an active signal set, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightProfile {
    name: ProfileName,
    weights: [Option<f64>; 5],
}

impl WeightProfile {
    pub fn new(name: ProfileName, weights: &[(SignalId, f64)]) -> Result<Self> {
        let mut table = [None; 5];
        for &(id, w) in weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidProfile(format!("{name}: weight {w} for {id} outside [0, 1]")));
            }
            if table[id.index()].replace(w).is_some() {
                return Err(Error::InvalidProfile(format!("{name}: {id} listed twice")));
            }
        }
        if weights.is_empty() {
            return Err(Error::EmptySignalSet);
        }
        let sum: f64 = weights.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidProfile(format!("{name}: weights sum to {sum}, not 1")));
        }
        Ok(Self { name, weights: table })
    }

    /// Builds a profile from a dense weight list over `signals` in S1..S5 order.
    pub fn from_dense(name: ProfileName, signals: SignalSet, weights: &[f64]) -> Result<Self> {
        if signals.len() != weights.len() {
            return Err(Error::InvalidProfile(format!(
                "{name}: {} weights given for {} signals ({signals})",
                weights.len(),
                signals.len()
            )));
        }
        let pairs: Vec<_> = signals.iter().zip(weights.iter().copied()).collect();
        Self::new(name, &pairs)
    }

    pub fn name(&self) -> ProfileName {
        self.name
    }

    pub fn weight(&self, id: SignalId) -> Option<f64> {
        self.weights[id.index()]
    }

    pub fn signals(&self) -> SignalSet {
        SignalId::ALL.into_iter().filter(|id| self.weights[id.index()].is_some()).collect()
    }

    /// Weights in S1..S5 order for the active signals.
    pub fn dense_weights(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }
}

/// Renormalizes `base` over `subset`: w'_i = w_i / Σ_{j∈subset} w_j.
pub fn redistribute_proportional(base: &WeightProfile, subset: SignalSet) -> Result<WeightProfile> {
    if subset.is_empty() {
        return Err(Error::EmptySignalSet);
    }
    if !subset.is_subset_of(base.signals()) {
        return Err(Error::InvalidProfile(format!(
            "subset {subset} is not covered by {} ({})",
            base.name,
            base.signals()
        )));
    }
    if subset == base.signals() {
        return Ok(*base);
    }
    let total: f64 = subset.iter().filter_map(|id| base.weight(id)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidProfile(format!("subset {subset} carries zero weight")));
    }
    let mut weights = [None; 5];
    for id in subset.iter() {
        weights[id.index()] = base.weight(id).map(|w| w / total);
    }
    Ok(WeightProfile {
        name: ProfileName::Proportional,
        weights,
    })
}

/// The four deployment profiles, one per common signal-availability pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTable {
    pub all_five: WeightProfile,
    pub no_network: WeightProfile,
    pub no_fixes: WeightProfile,
    pub v1: WeightProfile,
}

fn set(ids: &[SignalId]) -> SignalSet {
    ids.iter().copied().collect()
}

impl ProfileTable {
    pub const ALL_FIVE: [f64; 5] = [0.30, 0.10, 0.15, 0.25, 0.20];
    pub const NO_NETWORK: [f64; 4] = [0.35, 0.15, 0.20, 0.30];
    pub const NO_FIXES: [f64; 4] = [0.40, 0.15, 0.20, 0.25];
    pub const V1: [f64; 3] = [0.50, 0.20, 0.30];

    pub fn v1_signals() -> SignalSet {
        use SignalId::*;
        set(&[S1Movement, S2Accuracy, S3Temporal])
    }

    pub fn no_network_signals() -> SignalSet {
        SignalSet::ALL.without(SignalId::S5Network)
    }

    pub fn no_fixes_signals() -> SignalSet {
        SignalSet::ALL.without(SignalId::S4FixConsistency)
    }

    /// Builds a table from dense weight rows, validating each.
    pub fn from_rows(all_five: &[f64], no_network: &[f64], no_fixes: &[f64], v1: &[f64]) -> Result<Self> {
        Ok(Self {
            all_five: WeightProfile::from_dense(ProfileName::AllFive, SignalSet::ALL, all_five)?,
            no_network: WeightProfile::from_dense(ProfileName::NoNetwork, Self::no_network_signals(), no_network)?,
            no_fixes: WeightProfile::from_dense(ProfileName::NoFixes, Self::no_fixes_signals(), no_fixes)?,
            v1: WeightProfile::from_dense(ProfileName::V1, Self::v1_signals(), v1)?,
        })
    }

    /// Exact-match lookup of the predefined profiles; any other set falls back
    /// to proportional redistribution of the all-five profile.
    pub fn select(&self, available: SignalSet) -> Result<Cow<'_, WeightProfile>> {
        if available.is_empty() {
            return Err(Error::EmptySignalSet);
        }
        let predefined = [&self.all_five, &self.no_network, &self.no_fixes, &self.v1];
        if let Some(p) = predefined.into_iter().find(|p| p.signals() == available) {
            return Ok(Cow::Borrowed(p));
        }
        redistribute_proportional(&self.all_five, available).map(Cow::Owned)
    }
}

impl Default for ProfileTable {
    fn default() -> Self {
        Self::from_rows(&Self::ALL_FIVE, &Self::NO_NETWORK, &Self::NO_FIXES, &Self::V1)
            .expect("built-in weight profiles are valid")
    }
}

/// Dense weight rows of a [`ProfileTable`], in S1..S5 order per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileRows {
    pub all_five: Vec<f64>,
    pub no_network: Vec<f64>,
    pub no_fixes: Vec<f64>,
    pub v1: Vec<f64>,
}

impl Default for ProfileRows {
    fn default() -> Self {
        ProfileTable::default().into()
    }
}

impl From<ProfileTable> for ProfileRows {
    fn from(t: ProfileTable) -> Self {
        Self {
            all_five: t.all_five.dense_weights(),
            no_network: t.no_network.dense_weights(),
            no_fixes: t.no_fixes.dense_weights(),
            v1: t.v1.dense_weights(),
        }
    }
}

impl TryFrom<&ProfileRows> for ProfileTable {
    type Error = Error;

    fn try_from(r: &ProfileRows) -> Result<Self> {
        ProfileTable::from_rows(&r.all_five, &r.no_network, &r.no_fixes, &r.v1)
    }
}

/// Composite trust score for one fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustScore {
    pub value: f64,
    pub contributing: SignalVector,
    pub profile: WeightProfile,
}

/// T = Σ w_i s_i over the present signals.
pub fn compose(signals: &SignalVector, profile: &WeightProfile) -> Result<TrustScore> {
    let present = signals.present();
    if present != profile.signals() {
        return Err(Error::ProfileMismatch {
            profile: profile.signals().to_string(),
            present: present.to_string(),
        });
    }
    let raw: f64 = signals
        .iter()
        .map(|(id, s)| profile.weight(id).unwrap_or(0.0) * s)
        .sum();
    let value = ((raw * SCORE_GRID).round() / SCORE_GRID).clamp(0.0, 1.0);
    Ok(TrustScore {
        value,
        contributing: *signals,
        profile: *profile,
    })
}

/// Signal constants plus weight profiles: everything needed to score a fix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scorer {
    pub signals: SignalConfig,
    pub profiles: ProfileTable,
}

impl Scorer {
    pub fn new(signals: SignalConfig, profiles: ProfileTable) -> Result<Self> {
        signals.validate()?;
        Ok(Self { signals, profiles })
    }

    /// Evaluates the signals for `cur`, picks a profile for the available set
    /// and composes the score.
    pub fn score(&self, cur: &Fix, ctx: &SignalContext<'_>) -> Result<TrustScore> {
        let v = self.signals.evaluate_all(cur, ctx)?;
        let profile = self.profiles.select(v.present())?;
        compose(&v, &profile)
    }

    /// Scores `fixes[index]` against the fixes before it.
    pub fn score_in_trace(&self, fixes: &[Fix], index: usize) -> Result<TrustScore> {
        let cur = &fixes[index];
        self.score(cur, &SignalContext::for_fix(cur, &fixes[..index], self.signals.history_window))
    }
}
