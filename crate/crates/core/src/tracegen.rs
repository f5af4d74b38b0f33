//! Seeded synthetic trace corpus.
//!
//! Every trace is a pure function of `(scenario, seed, config)`. Per-trace
//! seeds are derived from the corpus master seed with SHA-256, and each trace
//! draws from its own ChaCha12 stream, so traces can be generated in any
//! order or in parallel and still come out bit-identical.
//!
//! Motion is simulated on a local tangent plane at the raw receiver rate
//! (`raw_samples_per_fix` samples per fix interval). A reported fix is the
//! last raw instant of its interval plus a slowly varying receiver error; its
//! raw buffer holds the samples of that interval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::{Fix, LatLon, NetworkHint, RawSample, Scenario, Trace, EARTH_RADIUS_M};

/// Identifies the generator algorithm; bump when output changes.
pub const GENERATOR_VERSION: &str = "trustgate-tracegen/1";
/// Random stream used for every trace.
pub const PRNG_ID: &str = "ChaCha12 (rand_chacha 0.9.0, seed_from_u64); normals via rand_distr 0.5.1; seeds SHA-256(domain|master|a|b)[0..8] LE";

/// Stored coordinates and accuracies are rounded to this many decimals so
/// that a serialized corpus parses back to identical values.
pub const DECIMALS: i32 = 7;

pub(crate) fn quantize(x: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    (x * scale).round() / scale
}

/// Deterministic 64-bit seed for stream `(a, b)` under `domain`.
pub fn stream_seed(domain: &str, master: u64, a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(master.to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Seed of trace `index` of `scenario` in a corpus.
pub fn trace_seed(master: u64, scenario: Scenario, index: u64) -> u64 {
    stream_seed("trace", master, scenario.index() as u64, index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Motion, noise and attack parameters. Ranges are `[lo, hi]`, sampled
/// uniformly unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub raw_samples_per_fix: usize,
    /// Per-axis std of the receiver error as a fraction of reported accuracy.
    pub gps_error_ratio: f64,
    /// AR(1) coefficient of the receiver error between consecutive fixes.
    pub gps_error_correlation: f64,
    /// Receiver error magnitude is capped at this multiple of accuracy.
    pub gps_error_cap_ratio: f64,
    /// Per-trace std of white raw-sample noise as a fraction of accuracy.
    pub raw_noise_ratio: (f64, f64),

    /// Walking speed ~ N(mean, sd), clipped to `walking_speed_clip`.
    pub walking_speed_mean: f64,
    pub walking_speed_sd: f64,
    pub walking_speed_clip: (f64, f64),
    /// Heading random-walk std in rad per sqrt(second).
    pub walking_heading_sd: f64,
    pub walking_accuracy: (f64, f64),

    pub driving_speed: (f64, f64),
    pub driving_max_accel: f64,
    pub driving_heading_sd: f64,
    pub driving_accuracy: (f64, f64),

    /// Maximum positional jitter of a stationary receiver.
    pub stationary_jitter_m: f64,
    pub stationary_accuracy: (f64, f64),

    pub train_speed: (f64, f64),
    pub train_heading_sd: f64,
    pub train_accuracy: (f64, f64),

    /// Share of traces whose hint comes from Wi-Fi; the rest use cell towers.
    pub wifi_hint_share: f64,
    pub wifi_hint_accuracy: (f64, f64),
    pub cell_hint_accuracy: (f64, f64),
    /// Honest hints sit within this multiple of their own accuracy of truth.
    pub hint_offset_ratio: f64,

    /// Share of fixes before the teleport.
    pub teleport_prefix_fraction: (f64, f64),
    pub teleport_distance_m: (f64, f64),
    /// Accuracy reported by mock-location fixes.
    pub mock_accuracy_m: f64,
    /// Drift rate beyond true motion, m/s.
    pub drift_rate: (f64, f64),
    /// Reported accuracy of simulator fixes.
    pub spoof_accuracy_m: (f64, f64),
    /// Distance between the replayed recording and the device.
    pub replay_offset_m: (f64, f64),
    /// Hint displacement in hint accuracies.
    pub mismatch_ratio: (f64, f64),
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            raw_samples_per_fix: 5,
            gps_error_ratio: 0.4,
            gps_error_correlation: 0.9,
            gps_error_cap_ratio: 1.2,
            raw_noise_ratio: (0.15, 0.3),

            walking_speed_mean: 1.4,
            walking_speed_sd: 0.3,
            walking_speed_clip: (0.5, 2.5),
            walking_heading_sd: 0.2,
            walking_accuracy: (5.0, 20.0),

            driving_speed: (5.0, 30.0),
            driving_max_accel: 2.0,
            driving_heading_sd: 0.05,
            driving_accuracy: (4.0, 15.0),

            stationary_jitter_m: 3.0,
            stationary_accuracy: (5.0, 20.0),

            train_speed: (20.0, 48.0),
            train_heading_sd: 0.005,
            train_accuracy: (2.5, 10.0),

            wifi_hint_share: 0.7,
            wifi_hint_accuracy: (15.0, 50.0),
            cell_hint_accuracy: (300.0, 1500.0),
            hint_offset_ratio: 1.5,

            teleport_prefix_fraction: (0.15, 0.35),
            teleport_distance_m: (5.0e5, 1.0e7),
            mock_accuracy_m: 0.01,
            drift_rate: (1.0, 4.0),
            spoof_accuracy_m: (0.005, 0.5),
            replay_offset_m: (2.0e4, 1.0e5),
            mismatch_ratio: (20.0, 100.0),
        }
    }
}

fn check_range(name: &str, r: (f64, f64), min: f64) -> Result<()> {
    if r.0.is_finite() && r.1.is_finite() && r.0 >= min && r.0 <= r.1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name}: range [{}, {}] invalid", r.0, r.1)))
    }
}

/// Legitimate motion must stay under the S1 knee.
const MAX_LEGIT_SPEED: f64 = 50.0;

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.raw_samples_per_fix < 3 {
            return Err(Error::InvalidConfig("raw_samples_per_fix must be at least 3".into()));
        }
        if !(0.0..1.0).contains(&self.gps_error_correlation) {
            return Err(Error::InvalidConfig("gps_error_correlation must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.wifi_hint_share) {
            return Err(Error::InvalidConfig("wifi_hint_share must lie in [0, 1]".into()));
        }
        for (name, r, min) in [
            ("raw_noise_ratio", self.raw_noise_ratio, 0.0),
            ("walking_speed_clip", self.walking_speed_clip, 0.0),
            ("walking_accuracy", self.walking_accuracy, 1e-3),
            ("driving_speed", self.driving_speed, 0.0),
            ("driving_accuracy", self.driving_accuracy, 1e-3),
            ("stationary_accuracy", self.stationary_accuracy, 1e-3),
            ("train_speed", self.train_speed, 0.0),
            ("train_accuracy", self.train_accuracy, 1e-3),
            ("wifi_hint_accuracy", self.wifi_hint_accuracy, 1e-3),
            ("cell_hint_accuracy", self.cell_hint_accuracy, 1e-3),
            ("teleport_prefix_fraction", self.teleport_prefix_fraction, 0.0),
            ("teleport_distance_m", self.teleport_distance_m, 1.0),
            ("drift_rate", self.drift_rate, 0.0),
            ("spoof_accuracy_m", self.spoof_accuracy_m, 1e-4),
            ("replay_offset_m", self.replay_offset_m, 0.0),
            ("mismatch_ratio", self.mismatch_ratio, 0.0),
        ] {
            check_range(name, r, min)?;
        }
        let fastest = self.walking_speed_clip.1.max(self.driving_speed.1).max(self.train_speed.1);
        if fastest >= MAX_LEGIT_SPEED {
            return Err(Error::InvalidConfig(format!(
                "legitimate speeds must stay below {MAX_LEGIT_SPEED} m/s, got {fastest}"
            )));
        }
        if self.teleport_prefix_fraction.1 >= 1.0 {
            return Err(Error::InvalidConfig("teleport_prefix_fraction must stay below 1".into()));
        }
        if self.mock_accuracy_m.is_nan() || self.mock_accuracy_m <= 0.0 {
            return Err(Error::InvalidConfig("mock_accuracy_m must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub master_seed: u64,
    pub traces_per_scenario: usize,
    pub fixes_per_trace: usize,
    pub fix_interval_ms: i64,
    /// Earliest trace start, ms since epoch; starts are spread over 30 days.
    pub start_time_ms: i64,
    pub params: ScenarioParams,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            master_seed: 20_260_101,
            traces_per_scenario: 1_000,
            fixes_per_trace: 60,
            fix_interval_ms: 1_000,
            start_time_ms: 1_767_225_600_000,
            params: ScenarioParams::default(),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.traces_per_scenario < 1 {
            return Err(Error::InvalidConfig("traces_per_scenario must be at least 1".into()));
        }
        if self.fixes_per_trace < 2 {
            return Err(Error::InvalidConfig("fixes_per_trace must be at least 2".into()));
        }
        if self.fix_interval_ms <= 0 || self.fix_interval_ms % self.params.raw_samples_per_fix.max(1) as i64 != 0 {
            return Err(Error::InvalidConfig(
                "fix_interval_ms must be positive and divisible by raw_samples_per_fix".into(),
            ));
        }
        self.params.validate()
    }
}

/// Point on a local east/north tangent plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Enu {
    east: f64,
    north: f64,
}

impl Enu {
    fn add(self, o: Enu) -> Enu {
        Enu {
            east: self.east + o.east,
            north: self.north + o.north,
        }
    }

    fn scale(self, k: f64) -> Enu {
        Enu {
            east: self.east * k,
            north: self.north * k,
        }
    }

    fn norm(self) -> f64 {
        self.east.hypot(self.north)
    }

    fn polar(r: f64, bearing: f64) -> Enu {
        Enu {
            east: r * bearing.sin(),
            north: r * bearing.cos(),
        }
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l == -180.0 && lon > 0.0 {
        l = 180.0;
    }
    l
}

fn to_lat_lon(origin: LatLon, p: Enu) -> LatLon {
    let lat = origin.lat + (p.north / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (p.east / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    LatLon {
        lat: quantize(lat.clamp(-90.0, 90.0)),
        lon: quantize(wrap_lon(lon)),
    }
}

/// Point `distance` meters from `origin` along initial `bearing` (radians).
fn destination(origin: LatLon, bearing: f64, distance: f64) -> LatLon {
    let delta = distance / EARTH_RADIUS_M;
    let (phi1, lambda1) = (origin.lat.to_radians(), origin.lon.to_radians());
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * bearing.cos()).asin();
    let lambda2 = lambda1 + (bearing.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    LatLon {
        lat: phi2.to_degrees(),
        lon: wrap_lon(lambda2.to_degrees()),
    }
}

fn uniform<R: Rng>(rng: &mut R, r: (f64, f64)) -> f64 {
    if r.1 > r.0 {
        rng.random_range(r.0..r.1)
    } else {
        r.0
    }
}

fn std_normal<R: Rng>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// Random origin away from the poles and the antimeridian.
fn random_origin<R: Rng>(rng: &mut R) -> LatLon {
    LatLon {
        lat: rng.random_range(-55.0..60.0),
        lon: rng.random_range(-170.0..170.0),
    }
}

fn far_destination<R: Rng>(rng: &mut R, origin: LatLon, distance: (f64, f64)) -> LatLon {
    for _ in 0..64 {
        let d = destination(origin, rng.random_range(0.0..std::f64::consts::TAU), uniform(rng, distance));
        if d.lat.abs() < 70.0 && d.lon.abs() < 175.0 {
            return d;
        }
    }
    // Fall back to due east/west along the origin latitude band.
    destination(origin, std::f64::consts::FRAC_PI_2, distance.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Motion {
    Walking,
    Driving,
    Stationary,
    Train,
}

/// True path sampled at the raw receiver rate.
fn simulate_path<R: Rng>(rng: &mut R, motion: Motion, samples: usize, dt_s: f64, p: &ScenarioParams) -> Vec<Enu> {
    let mut pos = Enu::default();
    let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(samples);
    match motion {
        Motion::Stationary => out.resize(samples, pos),
        Motion::Walking => {
            let base = (p.walking_speed_mean + p.walking_speed_sd * std_normal(rng))
                .clamp(p.walking_speed_clip.0, p.walking_speed_clip.1);
            let mut speed = base;
            for _ in 0..samples {
                out.push(pos);
                heading += p.walking_heading_sd * dt_s.sqrt() * std_normal(rng);
                speed = (speed + 0.1 * dt_s.sqrt() * std_normal(rng) + 0.05 * (base - speed))
                    .clamp(p.walking_speed_clip.0, p.walking_speed_clip.1);
                pos = pos.add(Enu::polar(speed * dt_s, heading));
            }
        }
        Motion::Driving => {
            let mut speed = uniform(rng, p.driving_speed);
            let mut target = uniform(rng, p.driving_speed);
            for _ in 0..samples {
                out.push(pos);
                if rng.random_bool((0.05 * dt_s).min(1.0)) {
                    target = uniform(rng, p.driving_speed);
                }
                let max_dv = p.driving_max_accel * dt_s;
                speed = (speed + (target - speed).clamp(-max_dv, max_dv)).clamp(p.driving_speed.0, p.driving_speed.1);
                heading += p.driving_heading_sd * dt_s.sqrt() * std_normal(rng);
                pos = pos.add(Enu::polar(speed * dt_s, heading));
            }
        }
        Motion::Train => {
            let cruise = uniform(rng, p.train_speed);
            let mut speed = cruise;
            for _ in 0..samples {
                out.push(pos);
                speed = (speed + 0.2 * dt_s.sqrt() * std_normal(rng)).clamp(p.train_speed.0, p.train_speed.1);
                heading += p.train_heading_sd * dt_s.sqrt() * std_normal(rng);
                pos = pos.add(Enu::polar(speed * dt_s, heading));
            }
        }
    }
    out
}

/// One fix before conversion: planar positions relative to the trace origin.
#[derive(Debug, Clone)]
struct Draft {
    truth: Enu,
    reported: Enu,
    accuracy: f64,
    raw: Vec<(Enu, f64)>,
    hint: Enu,
    hint_accuracy: f64,
}

/// An honest recording: the device really is where it reports.
fn honest_drafts<R: Rng>(rng: &mut R, motion: Motion, n: usize, p: &ScenarioParams, interval_ms: i64) -> Vec<Draft> {
    let m = p.raw_samples_per_fix;
    let dt_s = interval_ms as f64 / 1000.0 / m as f64;
    let path = simulate_path(rng, motion, n * m, dt_s, p);

    let accuracy_range = match motion {
        Motion::Walking => p.walking_accuracy,
        Motion::Driving => p.driving_accuracy,
        Motion::Stationary => p.stationary_accuracy,
        Motion::Train => p.train_accuracy,
    };
    let accuracy = uniform(rng, accuracy_range);
    let (error_sd, error_cap) = match motion {
        Motion::Stationary => (p.stationary_jitter_m / 2.0, p.stationary_jitter_m),
        _ => (p.gps_error_ratio * accuracy, p.gps_error_cap_ratio * accuracy),
    };
    let raw_sd = uniform(rng, p.raw_noise_ratio) * accuracy;

    let wifi = rng.random_bool(p.wifi_hint_share);
    let hint_accuracy = uniform(rng, if wifi { p.wifi_hint_accuracy } else { p.cell_hint_accuracy });
    let hint_offset = Enu::polar(
        p.hint_offset_ratio * hint_accuracy * rng.random::<f64>().sqrt(),
        rng.random_range(0.0..std::f64::consts::TAU),
    );

    let phi = p.gps_error_correlation;
    let innovation = (1.0 - phi * phi).sqrt() * error_sd;
    let mut error = Enu {
        east: error_sd * std_normal(rng),
        north: error_sd * std_normal(rng),
    };
    let mut drafts = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            error = Enu {
                east: phi * error.east + innovation * std_normal(rng),
                north: phi * error.north + innovation * std_normal(rng),
            };
        }
        let mag = error.norm();
        if mag > error_cap {
            error = error.scale(error_cap / mag);
        }
        let interval = &path[k * m..(k + 1) * m];
        let truth = interval[m - 1];
        let raw = interval
            .iter()
            .map(|&s| {
                let noise = Enu {
                    east: raw_sd * std_normal(rng),
                    north: raw_sd * std_normal(rng),
                };
                (s.add(error).add(noise), accuracy)
            })
            .collect();
        drafts.push(Draft {
            truth,
            reported: truth.add(error),
            accuracy,
            raw,
            hint: truth.add(hint_offset),
            hint_accuracy,
        });
    }
    drafts
}

fn random_motion<R: Rng>(rng: &mut R) -> Motion {
    [Motion::Walking, Motion::Driving, Motion::Stationary][rng.random_range(0..3)]
}

/// Mock-location style fix: exact position, tiny accuracy, and a raw buffer
/// that repeats the reported point.
fn make_synthetic(d: &mut Draft, accuracy: f64, m: usize) {
    d.accuracy = accuracy;
    d.raw = vec![(d.reported, accuracy); m];
}

struct Segment {
    origin: LatLon,
    drafts: Vec<Draft>,
}

fn assemble(
    scenario: Scenario,
    seed: u64,
    segments: Vec<Segment>,
    hint_origin: LatLon,
    t0: i64,
    interval_ms: i64,
) -> Result<Trace> {
    let session_id = format!("{}-{seed:016x}", scenario.as_str());
    let mut fixes = Vec::new();
    for seg in segments {
        for d in seg.drafts {
            let k = fixes.len() as i64;
            let pos = to_lat_lon(seg.origin, d.reported);
            let hint_pos = to_lat_lon(hint_origin, d.hint);
            let raw = d
                .raw
                .iter()
                .map(|(e, acc)| {
                    let ll = to_lat_lon(seg.origin, *e);
                    RawSample {
                        lat: ll.lat,
                        lon: ll.lon,
                        accuracy: quantize(*acc),
                    }
                })
                .collect();
            fixes.push(Fix {
                session_id: session_id.clone(),
                t: t0 + k * interval_ms,
                lat: pos.lat,
                lon: pos.lon,
                accuracy: quantize(d.accuracy),
                net_hint: Some(NetworkHint {
                    lat: hint_pos.lat,
                    lon: hint_pos.lon,
                    accuracy: quantize(d.hint_accuracy),
                }),
                raw_fixes: Some(raw),
            });
        }
    }
    Trace::new(fixes, None, Some(scenario), Some(seed))
}

/// Generates one trace; a pure function of `(cfg, scenario, seed)`.
pub fn generate_trace(cfg: &CorpusConfig, scenario: Scenario, seed: u64) -> Result<Trace> {
    cfg.validate()?;
    let p = &cfg.params;
    let n = cfg.fixes_per_trace;
    let m = p.raw_samples_per_fix;
    let interval = cfg.fix_interval_ms;
    let mut rng = rng_from_seed(seed);
    let origin = random_origin(&mut rng);
    let t0 = cfg.start_time_ms + rng.random_range(0..30 * 86_400) * 1000;

    let honest = |rng: &mut ChaCha12Rng, motion| honest_drafts(rng, motion, n, p, interval);
    let single = |drafts| vec![Segment { origin, drafts }];

    let segments = match scenario {
        Scenario::Walking => single(honest(&mut rng, Motion::Walking)),
        Scenario::Driving => single(honest(&mut rng, Motion::Driving)),
        Scenario::Stationary => single(honest(&mut rng, Motion::Stationary)),
        Scenario::Train => single(honest(&mut rng, Motion::Train)),
        Scenario::Teleportation | Scenario::Compound => {
            let motion = random_motion(&mut rng);
            let mut drafts = honest(&mut rng, motion);
            let prefix = ((n as f64 * uniform(&mut rng, p.teleport_prefix_fraction)).round() as usize).clamp(1, n - 1);
            let target = far_destination(&mut rng, origin, p.teleport_distance_m);
            if scenario == Scenario::Compound {
                let displacement = Enu::polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                let ratio = uniform(&mut rng, p.mismatch_ratio);
                for d in &mut drafts[..prefix] {
                    d.reported = d.truth;
                    let acc = uniform(&mut rng, p.spoof_accuracy_m);
                    make_synthetic(d, acc, m);
                    d.hint = d.hint.add(displacement.scale(ratio * d.hint_accuracy));
                }
            }
            // The mock replays the device's own motion pattern at the target.
            // Hints are always placed around the real origin, so they keep
            // following the real device.
            let mut suffix = drafts.split_off(prefix);
            for d in &mut suffix {
                d.reported = d.truth;
                make_synthetic(d, p.mock_accuracy_m, m);
            }
            vec![
                Segment { origin, drafts },
                Segment {
                    origin: target,
                    drafts: suffix,
                },
            ]
        }
        Scenario::Drift => {
            let motion = random_motion(&mut rng);
            let mut drafts = honest(&mut rng, motion);
            let rate = uniform(&mut rng, p.drift_rate);
            let dir = Enu::polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let dt_s = interval as f64 / 1000.0;
            for (k, d) in drafts.iter_mut().enumerate() {
                let offset = dir.scale(rate * dt_s * k as f64);
                d.reported = d.reported.add(offset);
                for (e, _) in &mut d.raw {
                    *e = e.add(offset);
                }
            }
            single(drafts)
        }
        Scenario::Accuracy => {
            let motion = random_motion(&mut rng);
            let mut drafts = honest(&mut rng, motion);
            for d in &mut drafts {
                d.reported = d.truth;
                let acc = uniform(&mut rng, p.spoof_accuracy_m);
                make_synthetic(d, acc, m);
            }
            single(drafts)
        }
        Scenario::Replay => {
            // Device sits still; the attacker replays a recording made elsewhere.
            let device = honest(&mut rng, Motion::Stationary);
            let motion = random_motion(&mut rng);
            let recording = honest(&mut rng, motion);
            let replay_origin = destination(
                origin,
                rng.random_range(0.0..std::f64::consts::TAU),
                uniform(&mut rng, p.replay_offset_m),
            );
            let drafts = recording
                .into_iter()
                .zip(device)
                .map(|(mut rec, dev)| {
                    let acc = rec.accuracy;
                    make_synthetic(&mut rec, acc, m);
                    rec.hint = dev.hint;
                    rec.hint_accuracy = dev.hint_accuracy;
                    rec
                })
                .collect();
            vec![Segment {
                origin: replay_origin,
                drafts,
            }]
        }
        Scenario::NetMismatch => {
            let motion = random_motion(&mut rng);
            let mut drafts = honest(&mut rng, motion);
            let dir = Enu::polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            let ratio = uniform(&mut rng, p.mismatch_ratio);
            for d in &mut drafts {
                d.hint = d.hint.add(dir.scale(ratio * d.hint_accuracy));
            }
            single(drafts)
        }
    };
    assemble(scenario, seed, segments, origin, t0, interval)
}

/// A generated corpus, traces grouped by scenario in [`Scenario::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub traces: Vec<Trace>,
}

impl Corpus {
    pub fn label_counts(&self) -> (usize, usize) {
        let spoofed = self.traces.iter().filter(|t| t.label.is_some_and(|l| l.is_spoofed())).count();
        (self.traces.len() - spoofed, spoofed)
    }
}

/// Generates `traces_per_scenario` traces for each of the ten scenarios.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    cfg.validate()?;
    let jobs: Vec<(Scenario, u64)> = Scenario::ALL
        .into_iter()
        .flat_map(|s| (0..cfg.traces_per_scenario as u64).map(move |i| (s, i)))
        .collect();
    let traces = jobs
        .par_iter()
        .map(|&(s, i)| generate_trace(cfg, s, trace_seed(cfg.master_seed, s, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        config: cfg.clone(),
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{haversine_m, speed_between, Label, Position};

    fn small() -> CorpusConfig {
        CorpusConfig {
            traces_per_scenario: 3,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = small();
        for s in Scenario::ALL {
            let a = generate_trace(&cfg, s, 99).unwrap();
            let b = generate_trace(&cfg, s, 99).unwrap();
            assert_eq!(a, b, "{s}");
            assert_ne!(a, generate_trace(&cfg, s, 100).unwrap());
        }
    }

    #[test]
    fn teleport_contains_a_jump() {
        let cfg = small();
        for seed in 0..20 {
            let t = generate_trace(&cfg, Scenario::Teleportation, seed).unwrap();
            let max_v = t
                .fixes
                .windows(2)
                .map(|w| speed_between(&w[0], &w[1]).unwrap())
                .fold(0.0, f64::max);
            assert!(max_v > 100.0);
            let jump = t.fixes.windows(2).map(|w| haversine_m(w[0].lat_lon(), w[1].lat_lon())).fold(0.0, f64::max);
            assert!(jump >= 4.9e5, "{jump}");
        }
    }

    #[test]
    fn accuracy_scenario_reports_sub_two_meter_accuracy() {
        let t = generate_trace(&small(), Scenario::Accuracy, 5).unwrap();
        assert!(t.fixes.iter().all(|f| f.accuracy < 2.0));
    }

    #[test]
    fn legitimate_motion_stays_under_knee() {
        let cfg = small();
        for s in [Scenario::Walking, Scenario::Driving, Scenario::Stationary, Scenario::Train] {
            for seed in 0..10 {
                let t = generate_trace(&cfg, s, seed).unwrap();
                assert_eq!(t.label, Some(Label::Legitimate));
                for w in t.fixes.windows(2) {
                    assert!(speed_between(&w[0], &w[1]).unwrap() < 100.0);
                }
                assert!(t.fixes.iter().all(|f| f.accuracy >= 2.0));
            }
        }
    }

    #[test]
    fn corpus_shape() {
        let corpus = generate_corpus(&CorpusConfig {
            traces_per_scenario: 1,
            ..CorpusConfig::default()
        })
        .unwrap();
        assert_eq!(corpus.traces.len(), 10);
        assert_eq!(corpus.label_counts(), (4, 6));
        let c2 = generate_corpus(&small()).unwrap();
        assert_eq!(c2.traces.len(), 30);
        assert_eq!(c2, generate_corpus(&small()).unwrap());
        assert!(c2.traces.iter().all(|t| t.fixes.len() == 60));
    }

    #[test]
    fn seeds_are_distinct_per_stream() {
        let a = trace_seed(1, Scenario::Walking, 0);
        assert_ne!(a, trace_seed(1, Scenario::Walking, 1));
        assert_ne!(a, trace_seed(1, Scenario::Driving, 0));
        assert_ne!(a, trace_seed(2, Scenario::Walking, 0));
        assert_eq!(a, trace_seed(1, Scenario::Walking, 0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = CorpusConfig::default();
        cfg.params.train_speed = (20.0, 55.0);
        assert!(cfg.validate().is_err());
        let cfg = CorpusConfig {
            fixes_per_trace: 1,
            ..CorpusConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = CorpusConfig {
            fix_interval_ms: 0,
            ..CorpusConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn destination_round_trip() {
        let o = LatLon { lat: 35.0, lon: 139.0 };
        let d = destination(o, 1.0, 1.0e6);
        assert!((haversine_m(o, d) - 1.0e6).abs() < 1.0);
        assert_eq!(wrap_lon(190.0), -170.0);
        assert_eq!(wrap_lon(180.0), 180.0);
    }
}
