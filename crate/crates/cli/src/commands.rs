use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, Write};

use trustgate::experiments::{bench_scoring, run_ablation, run_detection, run_robustness, run_sweep, ExperimentReport};
use trustgate::tracefile::{manifest_path, parse_lines, parse_traces, sha256_hex, to_jsonl, write_corpus, Manifest};
use trustgate::tracegen::generate_corpus;
use trustgate::{Error, GateAction, GateMode, Latch, SessionStore, Thresholds, Trace};

use crate::config::Config;
use crate::{CliError, ExperimentArgs, ExperimentName, GenerateArgs, ReplayArgs};

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source,
    }
}

pub fn generate(config: &Config, args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = config.corpus.clone();
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = args.traces_per_scenario {
        cfg.traces_per_scenario = n;
    }
    let corpus = generate_corpus(&cfg)?;
    let manifest = write_corpus(&corpus, &args.out)?;
    writeln!(
        out,
        "wrote {} traces ({} fixes) to {}\nmanifest {}\nsha256 {}",
        manifest.trace_count,
        manifest.record_count,
        args.out.display(),
        manifest_path(&args.out).display(),
        manifest.content_sha256
    )
    .map_err(stdout_err)
}

#[derive(Debug, Default)]
struct SessionSummary {
    fixes: usize,
    scored: usize,
    proceed: usize,
    step_up: usize,
    deny: usize,
    first_latch: Option<usize>,
    latch: Option<Latch>,
}

pub fn replay(config: &Config, args: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scorer = config.scorer()?;
    let th = Thresholds::new(
        args.theta_p.unwrap_or(config.thresholds.theta_p),
        args.theta_s.unwrap_or(config.thresholds.theta_s),
    )?;
    let mode: GateMode = args.mode.into();
    let strict = config.strict && !args.lenient;
    let file = fs::File::open(&args.input).map_err(io_err(&args.input))?;

    let store = SessionStore::new(scorer.signals.history_window);
    let mut order: Vec<String> = Vec::new();
    let mut summaries: HashMap<String, SessionSummary> = HashMap::new();
    for parsed in parse_lines(BufReader::new(file), strict) {
        let parsed = parsed?;
        let line = parsed.line;
        let id = parsed.fix.session_id.clone();
        let step = store
            .step_mode(parsed.fix, &scorer, &th, mode)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let latch = store.with_session(&id, |s| s.latch());
        let summary = summaries.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            SessionSummary::default()
        });
        summary.fixes += 1;
        match step.action {
            GateAction::Proceed | GateAction::UnscoredProceed => summary.proceed += 1,
            GateAction::StepUp => summary.step_up += 1,
            GateAction::Deny => summary.deny += 1,
        }
        if step.score.is_some() {
            summary.scored += 1;
        }
        if latch != Latch::Unlatched && summary.first_latch.is_none() {
            summary.first_latch = Some(summary.fixes);
        }
        summary.latch = Some(latch);
        let t = step.score.map_or_else(|| "unscored".to_owned(), |s| format!("{:.4}", s.value));
        writeln!(out, "{id} #{} T={t} {} latch={latch}", summary.fixes, step.action).map_err(stdout_err)?;
    }
    for id in &order {
        let s = &summaries[id];
        let first = s.first_latch.map_or_else(|| "none".to_owned(), |i| format!("#{i}"));
        writeln!(
            out,
            "summary {id}: mode={mode} theta_p={:.2} theta_s={:.2} fixes={} scored={} proceed={} step_up={} deny={} first_latch={first} final_latch={}",
            th.theta_p,
            th.theta_s,
            s.fixes,
            s.scored,
            s.proceed,
            s.step_up,
            s.deny,
            s.latch.unwrap_or(Latch::Unlatched)
        )
        .map_err(stdout_err)?;
    }
    Ok(())
}

/// Reads the corpus file, or generates one from the config, returning the
/// traces and the SHA-256 of their JSONL form.
fn load_corpus(config: &Config, args: &ExperimentArgs) -> Result<(Vec<Trace>, String), CliError> {
    let Some(path) = &args.corpus else {
        log::info!("no corpus given; generating from configuration");
        let corpus = generate_corpus(&config.corpus)?;
        let hash = sha256_hex(&to_jsonl(&corpus.traces));
        return Ok((corpus.traces, hash));
    };
    let bytes = fs::read(path).map_err(io_err(path))?;
    let hash = sha256_hex(&bytes);
    let mpath = manifest_path(path);
    if mpath.exists() {
        let manifest = Manifest::load(&mpath)?;
        if manifest.content_sha256 != hash {
            return Err(CliError::Config(format!(
                "{} does not match its manifest (sha256 {hash}, manifest {})",
                path.display(),
                manifest.content_sha256
            )));
        }
    }
    let traces = parse_traces(&bytes[..], config.strict)?;
    Ok((traces, hash))
}

pub fn experiment(config: &Config, args: &ExperimentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scorer = config.scorer()?;
    let cfg = config.experiment_config();
    let report: ExperimentReport = match args.name {
        ExperimentName::Bench => bench_scoring(&scorer, cfg.bench_iterations)?.to_report(&scorer, &cfg),
        name => {
            let (traces, hash) = load_corpus(config, args)?;
            let report = match name {
                ExperimentName::Detection => run_detection(&traces, &scorer, &cfg)?.to_report(&scorer, &cfg),
                ExperimentName::Ablation => run_ablation(&traces, &scorer, &cfg)?.to_report(&scorer, &cfg),
                ExperimentName::Sweep => run_sweep(&traces, &scorer, &cfg)?.to_report(&scorer, &cfg),
                ExperimentName::Robustness => run_robustness(&traces, &scorer, &cfg)?.to_report(&scorer, &cfg),
                ExperimentName::Bench => unreachable!(),
            };
            report.with_corpus_hash(Some(hash))
        }
    };
    let paths = report.write(&args.out)?;
    for t in &report.tables {
        writeln!(out, "{}\n\n{}", t.title, t.to_markdown()).map_err(stdout_err)?;
    }
    for p in paths {
        writeln!(out, "wrote {}", p.display()).map_err(stdout_err)?;
    }
    Ok(())
}
