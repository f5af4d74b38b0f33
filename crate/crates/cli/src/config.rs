//! TOML configuration.
//!
//! Every section is optional and defaults to the built-in values:
//!
//! ```toml
//! schema_version = 1
//! strict = true
//!
//! [thresholds]
//! theta_p = 0.7
//! theta_s = 0.3
//!
//! [oracle]
//! pass_legitimate = 1.0
//! pass_spoofed = 0.0
//!
//! [signals]      # signal ramp constants
//! [profiles]     # all_five / no_network / no_fixes / v1 weight rows
//! [corpus]       # generator settings, with [corpus.params]
//! [experiment]   # sweep thresholds, seeds, degradation, bench size
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use trustgate::experiments::{Degradation, ExperimentConfig};
use trustgate::scorer::ProfileRows;
use trustgate::{CorpusConfig, ProfileTable, Scorer, SignalConfig, StepUpOracle, Thresholds};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Experiment settings other than thresholds and oracle, which live at the
/// top level because replay uses them too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub oracle_seed: u64,
    pub sweep_theta_p: Vec<f64>,
    pub ablation_theta: f64,
    pub robustness_theta: f64,
    pub degradation: Degradation,
    pub bench_iterations: usize,
    pub fix_level: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        Self {
            oracle_seed: d.oracle_seed,
            sweep_theta_p: d.sweep_theta_p,
            ablation_theta: d.ablation_theta,
            robustness_theta: d.robustness_theta,
            degradation: d.degradation,
            bench_iterations: d.bench_iterations,
            fix_level: d.fix_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    /// Reject unknown fields in trace files instead of warning.
    pub strict: bool,
    pub thresholds: Thresholds,
    pub oracle: StepUpOracle,
    pub signals: SignalConfig,
    pub profiles: ProfileRows,
    pub corpus: CorpusConfig,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            strict: true,
            thresholds: Thresholds::default(),
            oracle: StepUpOracle::default(),
            signals: SignalConfig::default(),
            profiles: ProfileRows::default(),
            corpus: CorpusConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scorer()?;
        self.corpus.validate()?;
        self.experiment_config().validate()?;
        Ok(())
    }

    pub fn scorer(&self) -> Result<Scorer, CliError> {
        let profiles = ProfileTable::try_from(&self.profiles)?;
        Ok(Scorer::new(self.signals, profiles)?)
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            thresholds: self.thresholds,
            oracle: self.oracle,
            oracle_seed: e.oracle_seed,
            sweep_theta_p: e.sweep_theta_p.clone(),
            ablation_theta: e.ablation_theta,
            robustness_theta: e.robustness_theta,
            degradation: e.degradation,
            bench_iterations: e.bench_iterations,
            fix_level: e.fix_level,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = Config::from_toml("[thresholds]\ntheta_p = 0.9\ntheta_s = 0.2\n[corpus]\ntraces_per_scenario = 3\n").unwrap();
        assert_eq!(cfg.thresholds.theta_p, 0.9);
        assert_eq!(cfg.corpus.traces_per_scenario, 3);
        assert_eq!(cfg.corpus.fixes_per_trace, 60);
    }

    #[test]
    fn invalid_documents_rejected() {
        for text in [
            "schema_version = 2",
            "[thresholds]\ntheta_p = 0.2\ntheta_s = 0.3",
            "[profiles]\nv1 = [0.5, 0.5, 0.5]",
            "[signals]\nmovement_full_speed = 200.0",
            "unknown = 1",
            "[corpus.params]\ntrain_speed = [20.0, 80.0]",
            "[oracle]\npass_legitimate = 1.5",
        ] {
            assert!(matches!(Config::from_toml(text), Err(CliError::Config(_) | CliError::Core(_))), "{text}");
        }
    }
}
