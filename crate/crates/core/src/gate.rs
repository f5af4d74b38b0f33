//! Three-level gate, session latch and step-up adjudication.
//!
//! ```text
//!   T >= theta_p            -> proceed
//!   theta_s <= T < theta_p  -> step-up   (latches)
//!   T < theta_s             -> deny      (latches)
//! ```
//!
//! Latch transitions are `unlatched -> step-up`, `unlatched -> deny`,
//! `step-up -> unlatched` (successful verification) and
//! `step-up -> deny` (failed verification). Deny is absorbing.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Fix, Label, Trace};
use crate::scorer::{Scorer, TrustScore};
use crate::signals::SignalContext;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_p: f64,
    pub theta_s: f64,
}

impl Thresholds {
    pub fn new(theta_p: f64, theta_s: f64) -> Result<Self> {
        let th = Self { theta_p, theta_s };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_p > 0.0 && self.theta_p <= 1.0 && self.theta_s >= 0.0 && self.theta_s < 1.0;
        if ok && self.theta_s < self.theta_p {
            Ok(())
        } else {
            Err(Error::InvalidThresholds {
                theta_p: self.theta_p,
                theta_s: self.theta_s,
            })
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta_p: 0.7,
            theta_s: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateAction {
    Proceed,
    StepUp,
    Deny,
    /// First fix of a session: nothing to compare against, so not scored.
    UnscoredProceed,
}

impl GateAction {
    pub fn as_str(self) -> &'static str {
        match self {
            GateAction::Proceed => "proceed",
            GateAction::StepUp => "step_up",
            GateAction::Deny => "deny",
            GateAction::UnscoredProceed => "unscored_proceed",
        }
    }

    pub fn lets_through(self) -> bool {
        matches!(self, GateAction::Proceed | GateAction::UnscoredProceed)
    }
}

impl fmt::Display for GateAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a trust score to an action.
pub fn gate_eval(t: f64, th: &Thresholds) -> Result<GateAction> {
    th.validate()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidScore(t));
    }
    Ok(if t >= th.theta_p {
        GateAction::Proceed
    } else if t >= th.theta_s {
        GateAction::StepUp
    } else {
        GateAction::Deny
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Latch {
    Unlatched,
    StepUp,
    Deny,
}

impl Latch {
    pub fn as_str(self) -> &'static str {
        match self {
            Latch::Unlatched => "none",
            Latch::StepUp => "step_up",
            Latch::Deny => "deny",
        }
    }
}

impl fmt::Display for Latch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one [`SessionState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub action: GateAction,
    /// `None` when the fix was not scored (first fix, or latched session).
    pub score: Option<TrustScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Cleared,
    Denied,
}

/// Per-session gate state.
#[derive(Debug, Clone)]
pub struct SessionState {
    session_id: String,
    latch: Latch,
    history: VecDeque<Fix>,
    window: usize,
    fix_count: usize,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, window: usize) -> Self {
        Self {
            session_id: session_id.into(),
            latch: Latch::Unlatched,
            history: VecDeque::with_capacity(window + 1),
            window: window.max(1),
            fix_count: 0,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn latch(&self) -> Latch {
        self.latch
    }

    pub fn fix_count(&self) -> usize {
        self.fix_count
    }

    pub fn history(&self) -> impl Iterator<Item = &Fix> {
        self.history.iter()
    }

    fn remember(&mut self, fix: Fix) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(fix);
        self.fix_count += 1;
    }

    /// Processes one fix: latched sessions return the latch without scoring,
    /// the first fix passes unscored, everything else is scored and gated.
    pub fn step(&mut self, fix: Fix, scorer: &Scorer, th: &Thresholds) -> Result<Step> {
        self.step_mode(fix, scorer, th, GateMode::Graduated)
    }

    /// Like [`SessionState::step`]; in binary mode anything below `theta_p`
    /// denies.
    pub fn step_mode(&mut self, fix: Fix, scorer: &Scorer, th: &Thresholds, mode: GateMode) -> Result<Step> {
        if fix.session_id != self.session_id {
            return Err(Error::SessionMismatch {
                expected: self.session_id.clone(),
                got: fix.session_id,
            });
        }
        if let Some(last) = self.history.back() {
            if fix.t <= last.t {
                return Err(Error::TimestampOrder { prev: last.t, cur: fix.t });
            }
        }
        fix.validate()?;

        let latched = match self.latch {
            Latch::StepUp => Some(GateAction::StepUp),
            Latch::Deny => Some(GateAction::Deny),
            Latch::Unlatched => None,
        };
        if let Some(action) = latched {
            self.remember(fix);
            return Ok(Step { action, score: None });
        }
        if self.history.is_empty() {
            self.remember(fix);
            return Ok(Step {
                action: GateAction::UnscoredProceed,
                score: None,
            });
        }

        let score = {
            let history = self.history.make_contiguous();
            scorer.score(&fix, &SignalContext::for_fix(&fix, history, self.window))?
        };
        let action = match mode {
            GateMode::Graduated => gate_eval(score.value, th)?,
            GateMode::Binary if score.value >= th.theta_p => GateAction::Proceed,
            GateMode::Binary => GateAction::Deny,
        };
        match action {
            GateAction::StepUp => self.latch = Latch::StepUp,
            GateAction::Deny => self.latch = Latch::Deny,
            _ => {}
        }
        self.remember(fix);
        Ok(Step {
            action,
            score: Some(score),
        })
    }

    /// Hands a step-up latch to the verifier: a pass clears the latch, a
    /// failure converts it into a deny latch.
    pub fn resolve_step_up<R: Rng + ?Sized>(
        &mut self,
        oracle: &StepUpOracle,
        label: Label,
        rng: &mut R,
    ) -> Result<Resolution> {
        if self.latch != Latch::StepUp {
            return Err(Error::NotStepUpLatched(self.latch.as_str()));
        }
        if oracle.attempt(label, rng) {
            self.latch = Latch::Unlatched;
            Ok(Resolution::Cleared)
        } else {
            self.latch = Latch::Deny;
            Ok(Resolution::Denied)
        }
    }
}

/// Idealized stronger verifier: passes with a probability that depends only
/// on the ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepUpOracle {
    pub pass_legitimate: f64,
    pub pass_spoofed: f64,
}

impl Default for StepUpOracle {
    fn default() -> Self {
        Self {
            pass_legitimate: 1.0,
            pass_spoofed: 0.0,
        }
    }
}

impl StepUpOracle {
    pub fn new(pass_legitimate: f64, pass_spoofed: f64) -> Result<Self> {
        let oracle = Self {
            pass_legitimate,
            pass_spoofed,
        };
        oracle.validate()?;
        Ok(oracle)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.pass_legitimate, self.pass_spoofed] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("oracle pass probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn pass_probability(&self, label: Label) -> f64 {
        match label {
            Label::Legitimate => self.pass_legitimate,
            Label::Spoofed => self.pass_spoofed,
        }
    }

    /// One verification attempt. Always draws exactly one number from `rng`.
    pub fn attempt<R: Rng + ?Sized>(&self, label: Label, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        u < self.pass_probability(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Accept iff T >= theta_p, deny otherwise.
    Binary,
    /// Three-level gate with session latch and oracle-resolved step-up.
    Graduated,
}

impl GateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GateMode::Binary => "binary",
            GateMode::Graduated => "graduated",
        }
    }
}

impl fmt::Display for GateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(GateMode::Binary),
            "graduated" => Ok(GateMode::Graduated),
            other => Err(Error::InvalidConfig(format!("unknown gate mode {other:?}"))),
        }
    }
}

/// Trace-level outcome of running a session through the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Accepted,
    Denied,
    SteppedUpThenAccepted,
    SteppedUpThenDenied,
}

impl Disposition {
    pub fn is_accepted(self) -> bool {
        matches!(self, Disposition::Accepted | Disposition::SteppedUpThenAccepted)
    }

    pub fn stepped_up(self) -> bool {
        matches!(self, Disposition::SteppedUpThenAccepted | Disposition::SteppedUpThenDenied)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::Accepted => "accepted",
            Disposition::Denied => "denied",
            Disposition::SteppedUpThenAccepted => "stepped_up_then_accepted",
            Disposition::SteppedUpThenDenied => "stepped_up_then_denied",
        }
    }
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutcome {
    pub session_id: String,
    pub mode: GateMode,
    pub actions: Vec<GateAction>,
    /// Trust score per fix; `None` where the fix was not scored.
    pub scores: Vec<Option<f64>>,
    /// Latch state after each fix.
    pub latches: Vec<Latch>,
    pub min_score: Option<f64>,
    pub disposition: Disposition,
    /// Number of times the oracle was consulted.
    pub step_ups: u32,
    pub cleared: u32,
}

/// Runs every fix of `trace` through the gate.
///
/// In graduated mode the oracle is consulted as soon as a step-up latch is
/// set; a cleared session resumes scoring and may escalate again. In binary
/// mode the first fix below `theta_p` denies and latches the session.
pub fn run_trace<R: Rng + ?Sized>(
    trace: &Trace,
    scorer: &Scorer,
    th: &Thresholds,
    mode: GateMode,
    oracle: &StepUpOracle,
    rng: &mut R,
) -> Result<TraceOutcome> {
    for w in trace.fixes.windows(2) {
        if w[1].t <= w[0].t {
            return Err(Error::TimestampOrder { prev: w[0].t, cur: w[1].t });
        }
    }
    let window = scorer.signals.history_window;
    // Scoring straight off the trace slice avoids copying fixes into a
    // session buffer; the semantics match SessionState::step.
    let score_at = |i: usize| {
        let cur = &trace.fixes[i];
        scorer
            .score(cur, &SignalContext::for_fix(cur, &trace.fixes[..i], window))
            .map(|s| s.value)
    };
    drive(trace.session_id(), trace.label, trace.fixes.len(), score_at, th, mode, oracle, rng)
}

/// Gates a trace whose scores are already known. `scores[i]` is the trust
/// score of fix `i + 1`; the first fix is never scored. Decisions are the
/// same as [`run_trace`] on a trace producing those scores.
pub fn run_scores<R: Rng + ?Sized>(
    session_id: &str,
    label: Option<Label>,
    scores: &[f64],
    th: &Thresholds,
    mode: GateMode,
    oracle: &StepUpOracle,
    rng: &mut R,
) -> Result<TraceOutcome> {
    drive(session_id, label, scores.len() + 1, |i| Ok(scores[i - 1]), th, mode, oracle, rng)
}

#[allow(clippy::too_many_arguments)]
fn drive<R: Rng + ?Sized>(
    session_id: &str,
    label: Option<Label>,
    n: usize,
    mut score_at: impl FnMut(usize) -> Result<f64>,
    th: &Thresholds,
    mode: GateMode,
    oracle: &StepUpOracle,
    rng: &mut R,
) -> Result<TraceOutcome> {
    th.validate()?;
    let mut actions = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    let mut latches = Vec::with_capacity(n);
    let mut latch = Latch::Unlatched;
    let mut step_ups = 0u32;
    let mut cleared = 0u32;
    let mut denied = false;

    for i in 0..n {
        let (action, score) = match latch {
            Latch::Deny => (GateAction::Deny, None),
            Latch::StepUp => (GateAction::StepUp, None),
            Latch::Unlatched if i == 0 => (GateAction::UnscoredProceed, None),
            Latch::Unlatched => {
                let t = score_at(i)?;
                let action = match mode {
                    GateMode::Graduated => gate_eval(t, th)?,
                    GateMode::Binary if t >= th.theta_p => GateAction::Proceed,
                    GateMode::Binary => GateAction::Deny,
                };
                (action, Some(t))
            }
        };
        if latch == Latch::Unlatched {
            match action {
                GateAction::Deny => {
                    latch = Latch::Deny;
                    denied = true;
                }
                GateAction::StepUp => {
                    step_ups += 1;
                    let label = label.ok_or_else(|| Error::MissingLabel(session_id.to_owned()))?;
                    if oracle.attempt(label, rng) {
                        cleared += 1;
                    } else {
                        latch = Latch::Deny;
                        denied = true;
                    }
                }
                _ => {}
            }
        }
        actions.push(action);
        scores.push(score);
        latches.push(latch);
    }

    let min_score = scores.iter().flatten().copied().reduce(f64::min);
    let disposition = match (step_ups > 0, denied) {
        (false, false) => Disposition::Accepted,
        (false, true) => Disposition::Denied,
        (true, false) => Disposition::SteppedUpThenAccepted,
        (true, true) => Disposition::SteppedUpThenDenied,
    };
    Ok(TraceOutcome {
        session_id: session_id.to_owned(),
        mode,
        actions,
        scores,
        latches,
        min_score,
        disposition,
        step_ups,
        cleared,
    })
}

/// Concurrent session registry. Each session sits behind its own lock so
/// callers get an atomic read-modify-write per session id while distinct
/// sessions proceed in parallel.
#[derive(Debug, Default)]
pub struct SessionStore {
    window: usize,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionState>>>>,
}

impl SessionStore {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            sessions: Mutex::default(),
        }
    }

    fn entry(&self, session_id: &str) -> Arc<Mutex<SessionState>> {
        let mut map = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(session_id.to_owned())
            .or_insert_with(|| Arc::new(Mutex::new(SessionState::new(session_id, self.window))))
            .clone()
    }

    /// Runs `f` with exclusive access to the session's state, creating it on
    /// first use.
    pub fn with_session<T>(&self, session_id: &str, f: impl FnOnce(&mut SessionState) -> T) -> T {
        let session = self.entry(session_id);
        let mut state = session.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut state)
    }

    /// Feeds one fix to its session.
    pub fn step(&self, fix: Fix, scorer: &Scorer, th: &Thresholds) -> Result<Step> {
        self.step_mode(fix, scorer, th, GateMode::Graduated)
    }

    pub fn step_mode(&self, fix: Fix, scorer: &Scorer, th: &Thresholds, mode: GateMode) -> Result<Step> {
        let id = fix.session_id.clone();
        self.with_session(&id, |s| s.step_mode(fix, scorer, th, mode))
    }

    /// Drops a session, which is the only way to clear a deny latch.
    pub fn restart(&self, session_id: &str) {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(session_id);
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Scenario, EARTH_RADIUS_M};
    use crate::signals::SignalConfig;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn east(t: i64, meters: f64, accuracy: f64) -> Fix {
        Fix::new("s", t, 0.0, (meters / EARTH_RADIUS_M).to_degrees(), accuracy).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn gate_examples() {
        let th = Thresholds::default();
        assert_eq!(gate_eval(0.95, &th).unwrap(), GateAction::Proceed);
        assert_eq!(gate_eval(0.50, &th).unwrap(), GateAction::StepUp);
        assert_eq!(gate_eval(0.22, &th).unwrap(), GateAction::Deny);
        assert_eq!(gate_eval(0.7, &th).unwrap(), GateAction::Proceed);
        assert_eq!(gate_eval(0.3, &th).unwrap(), GateAction::StepUp);
        assert!(gate_eval(1.2, &th).is_err());
        assert!(gate_eval(0.5, &Thresholds { theta_p: 0.3, theta_s: 0.3 }).is_err());
        assert!(Thresholds::new(0.0, 0.0).is_err());
        assert!(Thresholds::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn session_stepping_matches_run_trace_until_first_latch() {
        use crate::tracegen::{generate_trace, CorpusConfig};
        let scorer = Scorer::default();
        let cfg = CorpusConfig::default();
        // An oracle that always fails makes run_trace latch deny on step-up,
        // so compare only up to the first non-proceed action.
        let oracle = StepUpOracle::new(0.0, 0.0).unwrap();
        for (k, scenario) in Scenario::ALL.into_iter().enumerate() {
            let trace = generate_trace(&cfg, scenario, k as u64).unwrap();
            for mode in [GateMode::Binary, GateMode::Graduated] {
                let th = Thresholds::new(0.95, 0.3).unwrap();
                let out = run_trace(&trace, &scorer, &th, mode, &oracle, &mut rng()).unwrap();
                let store = SessionStore::new(scorer.signals.history_window);
                for (i, fix) in trace.fixes.iter().enumerate() {
                    let step = store.step_mode(fix.clone(), &scorer, &th, mode).unwrap();
                    assert_eq!(step.action, out.actions[i]);
                    assert_eq!(step.score.map(|t| t.value), out.scores[i]);
                    if !step.action.lets_through() {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn first_fix_is_unscored_then_honest_walk_proceeds() {
        let scorer = Scorer::default();
        let th = Thresholds::default();
        let mut s = SessionState::new("s", 10);
        let step = s.step(east(0, 0.0, 15.0), &scorer, &th).unwrap();
        assert_eq!(step.action, GateAction::UnscoredProceed);
        assert!(step.score.is_none());
        let step = s.step(east(1000, 10.0, 15.0), &scorer, &th).unwrap();
        assert_eq!(step.action, GateAction::Proceed);
        let score = step.score.unwrap();
        assert_eq!(score.value, 1.0);
        assert_eq!(score.profile.name(), crate::scorer::ProfileName::V1);
    }

    #[test]
    fn deny_latch_absorbs_honest_fixes() {
        let scorer = Scorer::default();
        let th = Thresholds::default();
        let mut s = SessionState::new("s", 10);
        s.step(east(0, 0.0, 15.0), &scorer, &th).unwrap();
        // 1,000 km in one second at 1 cm accuracy
        let step = s.step(east(1000, 1.0e6, 0.01), &scorer, &th).unwrap();
        assert_eq!(step.action, GateAction::Deny);
        assert_eq!(s.latch(), Latch::Deny);
        for i in 2..20 {
            let step = s.step(east(i * 1000, 1.0e6 + i as f64, 15.0), &scorer, &th).unwrap();
            assert_eq!(step.action, GateAction::Deny);
            assert!(step.score.is_none());
        }
        assert!(s.resolve_step_up(&StepUpOracle::default(), Label::Legitimate, &mut rng()).is_err());
    }

    #[test]
    fn session_errors() {
        let scorer = Scorer::default();
        let th = Thresholds::default();
        let mut s = SessionState::new("s", 10);
        let mut other = east(0, 0.0, 15.0);
        other.session_id = "x".into();
        assert!(matches!(s.step(other, &scorer, &th), Err(Error::SessionMismatch { .. })));
        s.step(east(1000, 0.0, 15.0), &scorer, &th).unwrap();
        assert!(matches!(s.step(east(1000, 0.0, 15.0), &scorer, &th), Err(Error::TimestampOrder { .. })));
    }

    #[test]
    fn step_up_resolution() {
        let scorer = Scorer::default();
        // theta_p above the V1 score of a fix with 1 m accuracy: 0.5 + 0.1 + 0.3 = 0.9
        let th = Thresholds::new(0.95, 0.3).unwrap();
        let setup = || {
            let mut s = SessionState::new("s", 10);
            s.step(east(0, 0.0, 15.0), &scorer, &th).unwrap();
            let step = s.step(east(1000, 1.0, 1.0), &scorer, &th).unwrap();
            assert_eq!(step.action, GateAction::StepUp);
            assert!((step.score.unwrap().value - 0.9).abs() < 1e-9);
            s
        };
        let oracle = StepUpOracle::default();
        let mut s = setup();
        assert_eq!(s.resolve_step_up(&oracle, Label::Legitimate, &mut rng()).unwrap(), Resolution::Cleared);
        assert_eq!(s.latch(), Latch::Unlatched);
        let mut s = setup();
        assert_eq!(s.resolve_step_up(&oracle, Label::Spoofed, &mut rng()).unwrap(), Resolution::Denied);
        assert_eq!(s.latch(), Latch::Deny);
        let mut s = SessionState::new("s", 10);
        assert!(matches!(
            s.resolve_step_up(&oracle, Label::Legitimate, &mut rng()),
            Err(Error::NotStepUpLatched(_))
        ));
    }

    #[test]
    fn half_probability_oracle_clears_half() {
        let oracle = StepUpOracle::new(0.5, 0.5).unwrap();
        let mut r = rng();
        let trials = 10_000;
        let passed = (0..trials).filter(|_| oracle.attempt(Label::Spoofed, &mut r)).count();
        let rate = passed as f64 / trials as f64;
        assert!((rate - 0.5).abs() <= 0.02, "{rate}");
        assert!(StepUpOracle::new(1.5, 0.0).is_err());
    }

    fn trace_from(fixes: Vec<Fix>, scenario: Scenario) -> Trace {
        Trace::new(fixes, None, Some(scenario), None).unwrap()
    }

    #[test]
    fn teleport_trace_denies_at_transition() {
        let mut fixes: Vec<_> = (0..27).map(|i| east(i * 1000, i as f64, 10.0)).collect();
        fixes.extend((27..58).map(|i| east(i * 1000, 1.0e7 + i as f64, 0.01)));
        let trace = trace_from(fixes, Scenario::Teleportation);
        let out = run_trace(
            &trace,
            &Scorer::default(),
            &Thresholds::default(),
            GateMode::Graduated,
            &StepUpOracle::default(),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(out.actions[0], GateAction::UnscoredProceed);
        assert!(out.actions[1..27].iter().all(|a| *a == GateAction::Proceed));
        assert_eq!(out.actions[27], GateAction::Deny);
        assert!(out.scores[27].unwrap() < 0.3);
        assert_eq!(out.actions[28..].len(), 30);
        assert!(out.actions[27..].iter().all(|a| *a == GateAction::Deny));
        assert_eq!(out.disposition, Disposition::Denied);
        assert_eq!(out.step_ups, 0);
    }

    #[test]
    fn borderline_trace_routes_to_step_up_at_strict_threshold() {
        // accuracy 1 m gives S2 = 0.5 and a V1 score of 0.9
        let fixes: Vec<_> = (0..10).map(|i| east(i * 1000, i as f64, 1.0)).collect();
        let trace = trace_from(fixes, Scenario::Accuracy);
        let run = |theta_p| {
            run_trace(
                &trace,
                &Scorer::default(),
                &Thresholds::new(theta_p, 0.3).unwrap(),
                GateMode::Graduated,
                &StepUpOracle::default(),
                &mut rng(),
            )
            .unwrap()
        };
        let lenient = run(0.7);
        assert_eq!(lenient.disposition, Disposition::Accepted);
        let strict = run(0.95);
        assert_eq!(strict.actions[1], GateAction::StepUp);
        assert_eq!(strict.disposition, Disposition::SteppedUpThenDenied);
        assert!(strict.actions[2..].iter().all(|a| *a == GateAction::Deny));
    }

    #[test]
    fn cleared_session_resumes_scoring_and_can_relatch() {
        let fixes: Vec<_> = (0..6).map(|i| east(i * 1000, i as f64, 1.0)).collect();
        let trace = Trace::new(fixes, Some(Label::Legitimate), None, None).unwrap();
        let out = run_trace(
            &trace,
            &Scorer::default(),
            &Thresholds::new(0.95, 0.3).unwrap(),
            GateMode::Graduated,
            &StepUpOracle::default(),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(out.step_ups, 5);
        assert_eq!(out.cleared, 5);
        assert!(out.scores[1..].iter().all(Option::is_some));
        assert_eq!(out.disposition, Disposition::SteppedUpThenAccepted);
    }

    #[test]
    fn binary_mode_has_no_step_up_band() {
        let fixes: Vec<_> = (0..5).map(|i| east(i * 1000, i as f64, 1.0)).collect();
        let trace = Trace::new(fixes, Some(Label::Legitimate), None, None).unwrap();
        let out = run_trace(
            &trace,
            &Scorer::default(),
            &Thresholds::new(0.95, 0.3).unwrap(),
            GateMode::Binary,
            &StepUpOracle::default(),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(out.actions[1], GateAction::Deny);
        assert_eq!(out.disposition, Disposition::Denied);
        assert_eq!(out.step_ups, 0);
    }

    #[test]
    fn unlabelled_trace_cannot_consult_oracle() {
        let fixes: Vec<_> = (0..3).map(|i| east(i * 1000, i as f64, 1.0)).collect();
        let trace = Trace::new(fixes, None, None, None).unwrap();
        let th = Thresholds::new(0.95, 0.3).unwrap();
        let res = run_trace(&trace, &Scorer::default(), &th, GateMode::Graduated, &StepUpOracle::default(), &mut rng());
        assert!(matches!(res, Err(Error::MissingLabel(_))));
    }

    #[test]
    fn session_store_isolates_sessions() {
        let store = SessionStore::new(10);
        let scorer = Scorer::default();
        let th = Thresholds::default();
        let mut a0 = east(0, 0.0, 15.0);
        a0.session_id = "a".into();
        let mut a1 = east(1000, 1.0e6, 0.01);
        a1.session_id = "a".into();
        let mut b0 = east(0, 0.0, 15.0);
        b0.session_id = "b".into();
        store.step(a0, &scorer, &th).unwrap();
        assert_eq!(store.step(a1, &scorer, &th).unwrap().action, GateAction::Deny);
        assert_eq!(store.step(b0, &scorer, &th).unwrap().action, GateAction::UnscoredProceed);
        assert_eq!(store.len(), 2);
        assert_eq!(store.with_session("a", |s| s.latch()), Latch::Deny);
        store.restart("a");
        assert_eq!(store.with_session("a", |s| s.latch()), Latch::Unlatched);
    }

    #[test]
    fn session_store_serializes_concurrent_writers() {
        let store = SessionStore::new(10);
        std::thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| {
                    for _ in 0..100 {
                        store.with_session("shared", |s| s.fix_count += 1);
                    }
                });
            }
        });
        assert_eq!(store.with_session("shared", |s| s.fix_count()), 800);
    }

    proptest! {
        #[test]
        fn exactly_one_branch_fires(t in 0.0f64..=1.0, p in 0.01f64..=1.0, frac in 0.0f64..1.0) {
            let th = Thresholds::new(p, p * frac).unwrap();
            let action = gate_eval(t, &th).unwrap();
            let expected = [
                (t >= th.theta_p, GateAction::Proceed),
                (t >= th.theta_s && t < th.theta_p, GateAction::StepUp),
                (t < th.theta_s, GateAction::Deny),
            ];
            let fired: Vec<_> = expected.iter().filter(|(c, _)| *c).collect();
            prop_assert_eq!(fired.len(), 1);
            prop_assert_eq!(fired[0].1, action);
        }

        #[test]
        fn raising_theta_p_never_promotes(t in 0.0f64..=1.0, p1 in 0.31f64..=1.0, p2 in 0.31f64..=1.0) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a_lo = gate_eval(t, &Thresholds::new(lo, 0.3).unwrap()).unwrap();
            let a_hi = gate_eval(t, &Thresholds::new(hi, 0.3).unwrap()).unwrap();
            if a_lo != GateAction::Proceed {
                prop_assert_ne!(a_hi, GateAction::Proceed);
            }
        }

        #[test]
        fn latch_holds_over_random_streams(
            steps in proptest::collection::vec((0.0f64..2.0e5, 0.005f64..30.0), 2..40),
            theta_p in 0.5f64..1.0,
        ) {
            let scorer = Scorer::new(SignalConfig::default(), Default::default()).unwrap();
            let th = Thresholds::new(theta_p, 0.3).unwrap();
            let mut s = SessionState::new("s", 10);
            let mut pos = 0.0;
            let mut first_latch: Option<GateAction> = None;
            for (i, (jump, acc)) in steps.into_iter().enumerate() {
                pos += jump;
                let step = s.step(east(i as i64 * 1000, pos, acc), &scorer, &th).unwrap();
                match first_latch {
                    Some(latched) => {
                        prop_assert_eq!(step.action, latched);
                        prop_assert!(step.score.is_none());
                    }
                    None if matches!(step.action, GateAction::StepUp | GateAction::Deny) => {
                        first_latch = Some(step.action);
                    }
                    None => {}
                }
            }
        }

        #[test]
        fn deny_absorbs_perfect_fixes(n in 1usize..30) {
            let scorer = Scorer::default();
            let th = Thresholds::default();
            let mut s = SessionState::new("s", 10);
            s.step(east(0, 0.0, 15.0), &scorer, &th).unwrap();
            prop_assert_eq!(s.step(east(1000, 5.0e6, 0.01), &scorer, &th).unwrap().action, GateAction::Deny);
            for i in 0..n {
                let t = 2000 + i as i64 * 1000;
                let step = s.step(east(t, 5.0e6 + i as f64, 15.0), &scorer, &th).unwrap();
                prop_assert_eq!(step.action, GateAction::Deny);
            }
        }
    }
}
