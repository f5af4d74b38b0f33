//! JSONL trace format and corpus manifests.
//!
//! One JSON object per line:
//!
//! ```text
//! {"session_id":"s1","t_ms":1000,"lat":35.6,"lon":139.7,"accuracy_m":8.5,
//!  "net_hint":{"lat":35.6,"lon":139.7,"accuracy_m":40.0},
//!  "raw_fixes":[[35.6,139.7,8.5]],"label":"legitimate","scenario":"walking"}
//! ```
//!
//! `net_hint`, `raw_fixes`, `label` and `scenario` are optional. Consecutive
//! lines sharing a `session_id` form one trace.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::{Fix, Label, NetworkHint, RawSample, Scenario, Trace};
use crate::tracegen::{Corpus, CorpusConfig, GENERATOR_VERSION, PRNG_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintRecord {
    pub lat: f64,
    pub lon: f64,
    pub accuracy_m: f64,
    #[serde(flatten, skip_serializing)]
    pub extra: Map<String, Value>,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session_id: String,
    pub t_ms: i64,
    pub lat: f64,
    pub lon: f64,
    pub accuracy_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_hint: Option<HintRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_fixes: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(flatten, skip_serializing)]
    pub extra: Map<String, Value>,
}

impl TraceRecord {
    pub fn from_fix(fix: &Fix, label: Option<Label>, scenario: Option<Scenario>) -> Self {
        Self {
            session_id: fix.session_id.clone(),
            t_ms: fix.t,
            lat: fix.lat,
            lon: fix.lon,
            accuracy_m: fix.accuracy,
            net_hint: fix.net_hint.map(|h| HintRecord {
                lat: h.lat,
                lon: h.lon,
                accuracy_m: h.accuracy,
                extra: Map::new(),
            }),
            raw_fixes: fix
                .raw_fixes
                .as_ref()
                .map(|raw| raw.iter().map(|s| [s.lat, s.lon, s.accuracy]).collect()),
            label,
            scenario,
            extra: Map::new(),
        }
    }

    /// Names of fields this format does not know, including nested ones.
    pub fn unknown_fields(&self) -> Vec<String> {
        let mut out: Vec<String> = self.extra.keys().cloned().collect();
        if let Some(h) = &self.net_hint {
            out.extend(h.extra.keys().map(|k| format!("net_hint.{k}")));
        }
        out
    }

    pub fn to_fix(&self) -> Result<Fix> {
        let fix = Fix {
            session_id: self.session_id.clone(),
            t: self.t_ms,
            lat: self.lat,
            lon: self.lon,
            accuracy: self.accuracy_m,
            net_hint: self.net_hint.as_ref().map(|h| NetworkHint {
                lat: h.lat,
                lon: h.lon,
                accuracy: h.accuracy_m,
            }),
            raw_fixes: self.raw_fixes.as_ref().map(|raw| {
                raw.iter()
                    .map(|&[lat, lon, accuracy]| RawSample { lat, lon, accuracy })
                    .collect()
            }),
        };
        fix.validate()?;
        Ok(fix)
    }
}

/// A parsed line with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLine {
    pub line: usize,
    pub fix: Fix,
    pub label: Option<Label>,
    pub scenario: Option<Scenario>,
}

fn parse_error(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Parses one line. In strict mode unknown fields are an error, otherwise
/// they are logged and ignored.
pub fn parse_line(text: &str, line: usize, strict: bool) -> Result<ParsedLine> {
    let record: TraceRecord = serde_json::from_str(text).map_err(|e| parse_error(line, e))?;
    let unknown = record.unknown_fields();
    if !unknown.is_empty() {
        if strict {
            return Err(parse_error(line, format!("unknown field(s): {}", unknown.join(", "))));
        }
        log::warn!("line {line}: ignoring unknown field(s): {}", unknown.join(", "));
    }
    if let (Some(label), Some(scenario)) = (record.label, record.scenario) {
        if scenario.label() != label {
            return Err(parse_error(line, format!("scenario {scenario} is not {label}")));
        }
    }
    let fix = record.to_fix().map_err(|e| parse_error(line, e))?;
    Ok(ParsedLine {
        line,
        fix,
        label: record.label.or(record.scenario.map(Scenario::label)),
        scenario: record.scenario,
    })
}

/// Streams parsed lines, skipping blank ones.
pub fn parse_lines<R: BufRead>(reader: R, strict: bool) -> impl Iterator<Item = Result<ParsedLine>> {
    reader.lines().enumerate().filter_map(move |(i, text)| {
        let line = i + 1;
        match text {
            Err(e) => Some(Err(parse_error(line, e))),
            Ok(t) if t.trim().is_empty() => None,
            Ok(t) => Some(parse_line(&t, line, strict)),
        }
    })
}

/// Groups consecutive same-session lines into traces.
pub fn parse_traces<R: BufRead>(reader: R, strict: bool) -> Result<Vec<Trace>> {
    let mut traces = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut cur: Vec<ParsedLine> = Vec::new();

    let flush = |group: &mut Vec<ParsedLine>, traces: &mut Vec<Trace>| -> Result<()> {
        if group.is_empty() {
            return Ok(());
        }
        let first = group[0].line;
        let (label, scenario) = (group[0].label, group[0].scenario);
        if let Some(bad) = group.iter().find(|p| p.label != label || p.scenario != scenario) {
            return Err(parse_error(bad.line, "label or scenario differs within the trace"));
        }
        let fixes = group.drain(..).map(|p| p.fix).collect();
        let trace = Trace::new(fixes, label, scenario, None).map_err(|e| parse_error(first, e))?;
        traces.push(trace);
        Ok(())
    };

    for parsed in parse_lines(reader, strict) {
        let parsed = parsed?;
        if cur.first().is_some_and(|p| p.fix.session_id != parsed.fix.session_id) {
            flush(&mut cur, &mut traces)?;
        }
        if cur.is_empty() && !seen.insert(parsed.fix.session_id.clone()) {
            return Err(parse_error(
                parsed.line,
                format!("session {:?} resumes after another session", parsed.fix.session_id),
            ));
        }
        cur.push(parsed);
    }
    flush(&mut cur, &mut traces)?;
    Ok(traces)
}

pub fn read_traces(path: &Path, strict: bool) -> Result<Vec<Trace>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_traces(BufReader::new(file), strict)
}

/// Writes traces as JSONL, one fix per line.
pub fn write_traces<W: Write>(mut w: W, traces: &[Trace]) -> std::io::Result<()> {
    for trace in traces {
        for fix in &trace.fixes {
            let record = TraceRecord::from_fix(fix, trace.label, trace.scenario);
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn to_jsonl(traces: &[Trace]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_traces(&mut buf, traces).expect("writing to memory cannot fail");
    buf
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Everything needed to regenerate a corpus and check the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub prng: String,
    pub config: CorpusConfig,
    pub trace_count: usize,
    pub record_count: usize,
    /// SHA-256 of the JSONL corpus bytes.
    pub content_sha256: String,
}

impl Manifest {
    pub fn for_corpus(corpus: &Corpus, jsonl: &[u8]) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            generator: GENERATOR_VERSION.to_owned(),
            prng: PRNG_ID.to_owned(),
            config: corpus.config.clone(),
            trace_count: corpus.traces.len(),
            record_count: corpus.traces.iter().map(|t| t.fixes.len()).sum(),
            content_sha256: sha256_hex(jsonl),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "manifest schema version {} is not supported",
                self.schema_version
            )));
        }
        if self.generator != GENERATOR_VERSION {
            return Err(Error::InvalidConfig(format!(
                "manifest was written by {}, this build is {GENERATOR_VERSION}",
                self.generator
            )));
        }
        self.config.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| parse_error(e.line(), e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Path of the manifest that accompanies `corpus_path`: `x.jsonl` maps to
/// `x.manifest.json`.
pub fn manifest_path(corpus_path: &Path) -> std::path::PathBuf {
    corpus_path.with_extension("manifest.json")
}

/// Writes the corpus and its manifest; returns the manifest.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<Manifest> {
    let bytes = to_jsonl(&corpus.traces);
    let manifest = Manifest::for_corpus(corpus, &bytes);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, manifest.to_json()).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracegen::{generate_corpus, generate_trace};

    fn small_corpus() -> Corpus {
        generate_corpus(&CorpusConfig {
            traces_per_scenario: 2,
            ..CorpusConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let corpus = small_corpus();
        let bytes = to_jsonl(&corpus.traces);
        let parsed = parse_traces(&bytes[..], true).unwrap();
        assert_eq!(parsed.len(), 20);
        for (a, b) in parsed.iter().zip(&corpus.traces) {
            assert_eq!(a.fixes, b.fixes);
            assert_eq!((a.label, a.scenario), (b.label, b.scenario));
        }
        assert_eq!(to_jsonl(&parsed), bytes);
    }

    #[test]
    fn optional_fields_may_be_absent() {
        let text = "{\"session_id\":\"a\",\"t_ms\":0,\"lat\":1.0,\"lon\":2.0,\"accuracy_m\":5.0}\n\n\
                    {\"session_id\":\"a\",\"t_ms\":1000,\"lat\":1.0,\"lon\":2.0,\"accuracy_m\":5.0}\n";
        let traces = parse_traces(text.as_bytes(), true).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].label, None);
        assert!(traces[0].fixes[0].net_hint.is_none());
        let out = String::from_utf8(to_jsonl(&traces)).unwrap();
        assert_eq!(out, text.replace("\n\n", "\n"));
    }

    #[test]
    fn unknown_fields_strict_vs_lenient() {
        let text = "{\"session_id\":\"a\",\"t_ms\":0,\"lat\":1,\"lon\":2,\"accuracy_m\":5,\"speed\":3}\n\
                    {\"session_id\":\"a\",\"t_ms\":1,\"lat\":1,\"lon\":2,\"accuracy_m\":5,\
                    \"net_hint\":{\"lat\":1,\"lon\":2,\"accuracy_m\":30,\"source\":\"wifi\"}}\n";
        match parse_traces(text.as_bytes(), true) {
            Err(Error::Parse { line: 1, message }) => assert!(message.contains("speed")),
            other => panic!("{other:?}"),
        }
        let second_only = text.lines().nth(1).unwrap();
        match parse_line(second_only, 2, true) {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("net_hint.source")),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_traces(text.as_bytes(), false).unwrap().len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let good = "{\"session_id\":\"a\",\"t_ms\":0,\"lat\":1,\"lon\":2,\"accuracy_m\":5}";
        let cases = [
            format!("{good}\n{{not json\n"),
            format!("{good}\n{{\"session_id\":\"a\",\"t_ms\":5,\"lat\":95,\"lon\":2,\"accuracy_m\":5}}\n"),
            format!("{good}\n{{\"session_id\":\"a\",\"t_ms\":5,\"lat\":1,\"lon\":2}}\n"),
            format!("{good}\n{{\"session_id\":\"a\",\"t_ms\":5,\"lat\":1,\"lon\":2,\"accuracy_m\":5,\"label\":\"legitimate\",\"scenario\":\"replay\"}}\n"),
        ];
        for text in cases {
            match parse_traces(text.as_bytes(), true) {
                Err(Error::Parse { line: 2, .. }) => {}
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn split_sessions_and_short_traces_rejected() {
        let l = |s: &str, t: i64| format!("{{\"session_id\":\"{s}\",\"t_ms\":{t},\"lat\":1,\"lon\":2,\"accuracy_m\":5}}\n");
        let split = format!("{}{}{}{}{}", l("a", 0), l("a", 1), l("b", 0), l("b", 1), l("a", 2));
        assert!(matches!(parse_traces(split.as_bytes(), true), Err(Error::Parse { line: 5, .. })));
        let short = format!("{}{}{}", l("a", 0), l("b", 0), l("b", 1));
        assert!(matches!(parse_traces(short.as_bytes(), true), Err(Error::Parse { line: 1, .. })));
        let backwards = format!("{}{}", l("a", 5), l("a", 5));
        assert!(parse_traces(backwards.as_bytes(), true).is_err());
    }

    #[test]
    fn manifest_regenerates_identical_hash() {
        let dir = std::env::temp_dir().join(format!("trustgate-manifest-{}", std::process::id()));
        let path = dir.join("corpus.jsonl");
        let corpus = small_corpus();
        let manifest = write_corpus(&corpus, &path).unwrap();
        let loaded = Manifest::load(&manifest_path(&path)).unwrap();
        assert_eq!(loaded, manifest);
        let again = generate_corpus(&loaded.config).unwrap();
        assert_eq!(sha256_hex(&to_jsonl(&again.traces)), loaded.content_sha256);
        assert_eq!(sha256_hex(&fs::read(&path).unwrap()), loaded.content_sha256);
        assert!(read_traces(&dir.join("missing.jsonl"), true).unwrap_err().is_io());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn generated_traces_survive_parse() {
        let t = generate_trace(&CorpusConfig::default(), Scenario::Compound, 7).unwrap();
        let back = parse_traces(&to_jsonl(std::slice::from_ref(&t))[..], true).unwrap();
        assert_eq!(back[0].fixes, t.fixes);
    }
}
