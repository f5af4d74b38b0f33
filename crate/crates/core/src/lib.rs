//! Graduated trust gating for client-reported location fixes.
//!
//! A fix is scored by up to five heuristic integrity signals, the signals are
//! folded into a single trust score with a weight profile chosen for the
//! signals that are actually available, and the score is mapped to one of
//! three actions: proceed, step-up or deny. Sessions latch on the first
//! non-proceed action; a step-up latch is only cleared by an external
//! verifier, modelled here as a [`gate::StepUpOracle`].
//!
//! The crate also carries the tooling needed to evaluate the gate: a seeded
//! synthetic trace corpus ([`tracegen`]), a JSONL trace format
//! ([`tracefile`]), classification metrics ([`metrics`]) and the experiment
//! drivers that produce the detection, ablation, sweep, robustness and
//! latency reports ([`experiments`]).

pub mod error;
pub mod experiments;
pub mod gate;
pub mod geo;
pub mod metrics;
pub mod scorer;
pub mod signals;
pub mod tracefile;
pub mod tracegen;

pub use error::{Error, Result};
pub use gate::{
    gate_eval, run_trace, Disposition, GateAction, GateMode, Latch, SessionState, SessionStore,
    StepUpOracle, Thresholds, TraceOutcome,
};
pub use geo::{haversine_distance, speed_between, Fix, Label, LatLon, NetworkHint, RawSample, Scenario, Trace};
pub use scorer::{ProfileName, ProfileTable, Scorer, TrustScore, WeightProfile};
pub use signals::{SignalConfig, SignalContext, SignalId, SignalSet, SignalVector};
pub use tracegen::{CorpusConfig, ScenarioParams};
