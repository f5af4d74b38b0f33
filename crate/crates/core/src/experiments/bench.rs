//! Single-threaded latency of scoring one fix: signal evaluation plus
//! profile selection and composition.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use super::report::{ExperimentReport, Table};
use super::{ExperimentConfig, Snapshot};
use crate::error::{Error, Result};
use crate::geo::{Fix, Scenario};
use crate::scorer::Scorer;
use crate::signals::SignalContext;
use crate::tracegen::{generate_trace, CorpusConfig};

const WARMUP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyRow {
    pub signals: usize,
    pub iterations: usize,
    pub median_us: f64,
    pub p99_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    /// Three-signal context first, then the full five-signal context.
    pub rows: Vec<LatencyRow>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn time(scorer: &Scorer, history: &[Fix], cur: &Fix, iterations: usize) -> Result<LatencyRow> {
    let ctx = SignalContext::for_fix(cur, history, scorer.signals.history_window);
    let signals = scorer.score(cur, &ctx)?.contributing.present().len();
    for _ in 0..WARMUP {
        black_box(scorer.score(black_box(cur), black_box(&ctx))?);
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        black_box(scorer.score(black_box(cur), black_box(&ctx))?);
        samples.push(start.elapsed().as_nanos() as f64 / 1_000.0);
    }
    samples.sort_by(f64::total_cmp);
    Ok(LatencyRow {
        signals,
        iterations,
        median_us: percentile(&samples, 0.5),
        p99_us: percentile(&samples, 0.99),
    })
}

/// Times `iterations` scorings of a mid-trace walking fix with a full
/// history window, with and without its hint and raw samples.
pub fn bench_scoring(scorer: &Scorer, iterations: usize) -> Result<BenchResult> {
    if iterations < WARMUP {
        return Err(Error::InvalidConfig(format!("need at least {WARMUP} iterations")));
    }
    let trace = generate_trace(&CorpusConfig::default(), Scenario::Walking, 1)?;
    let index = 30;
    let history = &trace.fixes[..index];
    let full = trace.fixes[index].clone();
    let mut bare = full.clone();
    bare.net_hint = None;
    bare.raw_fixes = None;
    Ok(BenchResult {
        rows: vec![time(scorer, history, &bare, iterations)?, time(scorer, history, &full, iterations)?],
    })
}

impl BenchResult {
    pub fn full(&self) -> &LatencyRow {
        self.rows.last().expect("bench has rows")
    }

    pub fn to_report(&self, scorer: &Scorer, cfg: &ExperimentConfig) -> ExperimentReport {
        let mut t = Table::new("latency", "Scoring latency per fix (single thread)", &["signals", "iterations", "median_us", "p99_us"]);
        for r in &self.rows {
            t.push(vec![
                r.signals.to_string(),
                r.iterations.to_string(),
                format!("{:.3}", r.median_us),
                format!("{:.3}", r.p99_us),
            ]);
        }
        ExperimentReport::new("bench", &Snapshot::new(scorer, cfg), vec![t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_shape() {
        let r = bench_scoring(&Scorer::default(), 10_000).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!((r.rows[0].signals, r.rows[1].signals), (3, 5));
        for row in &r.rows {
            assert!(row.median_us >= 0.0 && row.p99_us >= row.median_us);
        }
        assert!(bench_scoring(&Scorer::default(), 10).is_err());
    }
}
