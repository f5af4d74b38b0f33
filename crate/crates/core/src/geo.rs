//! Location primitives: fixes, traces and great-circle arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A validated latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        check_coordinate(lat, lon)?;
        Ok(Self { lat, lon })
    }
}

fn check_coordinate(lat: f64, lon: f64) -> Result<()> {
    if lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
        Ok(())
    } else {
        Err(Error::InvalidCoordinate { lat, lon })
    }
}

fn check_accuracy(accuracy: f64) -> Result<()> {
    if accuracy.is_finite() && accuracy > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidAccuracy(accuracy))
    }
}

/// Anything with a position on the sphere.
pub trait Position {
    fn lat_lon(&self) -> LatLon;
}

impl Position for LatLon {
    fn lat_lon(&self) -> LatLon {
        *self
    }
}

/// Great-circle distance in meters between two points.
pub fn haversine_distance(a: LatLon, b: LatLon) -> Result<f64> {
    check_coordinate(a.lat, a.lon)?;
    check_coordinate(b.lat, b.lon)?;
    Ok(haversine_m(a, b))
}

/// Unchecked haversine for inputs that were validated on construction.
pub(crate) fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Implied speed in m/s between two consecutive fixes.
pub fn speed_between(prev: &Fix, cur: &Fix) -> Result<f64> {
    if cur.t <= prev.t {
        return Err(Error::TimestampOrder {
            prev: prev.t,
            cur: cur.t,
        });
    }
    let dt_s = (cur.t - prev.t) as f64 / 1000.0;
    Ok(haversine_m(prev.lat_lon(), cur.lat_lon()) / dt_s)
}

/// Cell or Wi-Fi derived coarse position reported alongside a fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkHint {
    pub lat: f64,
    pub lon: f64,
    /// Uncertainty radius in meters.
    pub accuracy: f64,
}

impl NetworkHint {
    pub fn new(lat: f64, lon: f64, accuracy: f64) -> Result<Self> {
        let hint = Self { lat, lon, accuracy };
        hint.validate()?;
        Ok(hint)
    }

    pub fn validate(&self) -> Result<()> {
        check_coordinate(self.lat, self.lon)?;
        check_accuracy(self.accuracy)
    }
}

impl Position for NetworkHint {
    fn lat_lon(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// One raw receiver sample backing a reported fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub lat: f64,
    pub lon: f64,
    pub accuracy: f64,
}

impl RawSample {
    pub fn new(lat: f64, lon: f64, accuracy: f64) -> Result<Self> {
        let sample = Self { lat, lon, accuracy };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        check_coordinate(self.lat, self.lon)?;
        check_accuracy(self.accuracy)
    }
}

impl Position for RawSample {
    fn lat_lon(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// A single client-reported location.
#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    /// Reported accuracy radius in meters.
    pub accuracy: f64,
    pub net_hint: Option<NetworkHint>,
    pub raw_fixes: Option<Vec<RawSample>>,
}

impl Fix {
    pub fn new(session_id: impl Into<String>, t: i64, lat: f64, lon: f64, accuracy: f64) -> Result<Self> {
        let fix = Self {
            session_id: session_id.into(),
            t,
            lat,
            lon,
            accuracy,
            net_hint: None,
            raw_fixes: None,
        };
        fix.validate()?;
        Ok(fix)
    }

    pub fn with_hint(mut self, hint: NetworkHint) -> Self {
        self.net_hint = Some(hint);
        self
    }

    pub fn with_raw_fixes(mut self, raw: Vec<RawSample>) -> Self {
        self.raw_fixes = Some(raw);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_coordinate(self.lat, self.lon)?;
        check_accuracy(self.accuracy)?;
        if let Some(hint) = &self.net_hint {
            hint.validate()?;
        }
        for sample in self.raw_fixes.iter().flatten() {
            sample.validate()?;
        }
        Ok(())
    }
}

impl Position for Fix {
    fn lat_lon(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Ground truth for a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Legitimate,
    Spoofed,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Legitimate => "legitimate",
            Label::Spoofed => "spoofed",
        }
    }

    pub fn is_spoofed(self) -> bool {
        self == Label::Spoofed
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legitimate" => Ok(Label::Legitimate),
            "spoofed" => Ok(Label::Spoofed),
            other => Err(Error::InvalidConfig(format!("unknown label {other:?}"))),
        }
    }
}

/// The ten corpus scenarios. The first four are legitimate motion, the
/// remaining six embed an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Walking,
    Driving,
    Stationary,
    Train,
    Teleportation,
    Drift,
    Accuracy,
    Replay,
    NetMismatch,
    Compound,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::Walking,
        Scenario::Driving,
        Scenario::Stationary,
        Scenario::Train,
        Scenario::Teleportation,
        Scenario::Drift,
        Scenario::Accuracy,
        Scenario::Replay,
        Scenario::NetMismatch,
        Scenario::Compound,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> Label {
        if self.index() < 4 {
            Label::Legitimate
        } else {
            Label::Spoofed
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Walking => "walking",
            Scenario::Driving => "driving",
            Scenario::Stationary => "stationary",
            Scenario::Train => "train",
            Scenario::Teleportation => "teleportation",
            Scenario::Drift => "drift",
            Scenario::Accuracy => "accuracy",
            Scenario::Replay => "replay",
            Scenario::NetMismatch => "net_mismatch",
            Scenario::Compound => "compound",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

/// An ordered sequence of fixes from one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub fixes: Vec<Fix>,
    /// Absent for ingested captures without ground truth.
    pub label: Option<Label>,
    pub scenario: Option<Scenario>,
    /// Seed that generated the trace; absent for ingested traces.
    pub seed: Option<u64>,
}

impl Trace {
    /// Validates and builds a trace. When only a scenario is given the label
    /// is derived from it.
    pub fn new(
        fixes: Vec<Fix>,
        label: Option<Label>,
        scenario: Option<Scenario>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let label = label.or(scenario.map(Scenario::label));
        let trace = Self {
            fixes,
            label,
            scenario,
            seed,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn session_id(&self) -> &str {
        self.fixes.first().map(|f| f.session_id.as_str()).unwrap_or("")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidTrace {
            session_id: self.session_id().to_owned(),
            reason,
        };
        if self.fixes.len() < 2 {
            return Err(invalid(format!("needs at least 2 fixes, has {}", self.fixes.len())));
        }
        if let (Some(label), Some(scenario)) = (self.label, self.scenario) {
            if scenario.label() != label {
                return Err(invalid(format!("scenario {scenario} is not {label}")));
            }
        }
        let session = self.session_id();
        for fix in &self.fixes {
            fix.validate()?;
            if fix.session_id != session {
                return Err(invalid(format!("mixed session ids {session:?} and {:?}", fix.session_id)));
            }
        }
        for pair in self.fixes.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(Error::TimestampOrder {
                    prev: pair[0].t,
                    cur: pair[1].t,
                });
            }
        }
        Ok(())
    }
}
