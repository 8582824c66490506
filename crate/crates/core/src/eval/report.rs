use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::{EvalCase, EvalSettings};
use crate::geometry::OverlapConfig;
use crate::retrieval::{RetrievalConfig, StrategyKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Stated in every report so the numbers are not mistaken for image metrics.
pub const PROXY_NOTE: &str =
    "coverage and precision/recall against visible-landmark co-visibility are \
desk-scale proxies for memory capability; they are not PSNR/LPIPS/FID/FVD of generated video";

/// Heuristic decision vs ground-truth co-visibility over (target, history
/// frame) pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
    pub pairs: u64,
}

impl Confusion {
    pub(super) fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
        self.pairs += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub segments: usize,
    pub coverage_mean: f64,
    /// Nearest-rank 10th percentile.
    pub coverage_p10: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub recall_pre_budget_mean: f64,
    pub context_size_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub strategy: StrategyKind,
    pub mean_query_latency_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub note: String,
    pub overlap: OverlapConfig,
    pub retrieval: RetrievalConfig,
    pub covis_threshold: usize,
    pub seeds: Vec<u64>,
    pub cases: Vec<String>,
    pub strategies: Vec<StrategySummary>,
    pub calibration: Confusion,
    /// Present only when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<LatencySummary>>,
}

/// One retrieval step in one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub case: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub segment: usize,
    pub target_frame: u32,
    pub context_size: usize,
    pub coverage: f64,
    pub precision: f64,
    pub recall: f64,
    pub recall_pre_budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub series: Vec<SegmentRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil().max(1.0) as usize;
    v[rank - 1]
}

pub(super) fn build(
    cases: &[EvalCase],
    settings: &EvalSettings,
    series: Vec<SegmentRow>,
    calibration: Confusion,
    latencies: &[(StrategyKind, u64)],
) -> EvalRun {
    let strategies = settings
        .strategies
        .iter()
        .map(|&s| {
            let rows: Vec<&SegmentRow> = series.iter().filter(|r| r.strategy == s).collect();
            let cov: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
            StrategySummary {
                strategy: s,
                segments: rows.len(),
                coverage_mean: mean(cov.iter().copied()),
                coverage_p10: percentile(&cov, 0.10),
                precision_mean: mean(rows.iter().map(|r| r.precision)),
                recall_mean: mean(rows.iter().map(|r| r.recall)),
                recall_pre_budget_mean: mean(rows.iter().map(|r| r.recall_pre_budget)),
                context_size_mean: mean(rows.iter().map(|r| r.context_size as f64)),
            }
        })
        .collect();
    let timing = settings.timing.then(|| {
        settings
            .strategies
            .iter()
            .map(|&s| LatencySummary {
                strategy: s,
                mean_query_latency_us: mean(
                    latencies
                        .iter()
                        .filter(|l| l.0 == s)
                        .map(|l| l.1 as f64 / 1e3),
                ),
            })
            .collect()
    });
    EvalRun {
        report: EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            note: PROXY_NOTE.into(),
            overlap: settings.overlap,
            retrieval: settings.retrieval,
            covis_threshold: settings.covis_threshold,
            seeds: settings.seeds.clone(),
            cases: cases.iter().map(|c| c.label.clone()).collect(),
            strategies,
            calibration,
            timing,
        },
        series,
    }
}

impl EvalReport {
    pub fn summary(&self, s: StrategyKind) -> Option<&StrategySummary> {
        self.strategies.iter().find(|x| x.strategy == s)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self).expect("report serializes")
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.note);
        let _ = writeln!(
            out,
            "# cases: {}; seeds: {:?}",
            self.cases.len(),
            self.seeds
        );
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>9} {:>8} {:>9} {:>7} {:>9} {:>7}",
            "strategy", "segments", "coverage", "cov p10", "precision", "recall", "recall*", "ctx"
        );
        for s in &self.strategies {
            let _ = writeln!(
                out,
                "{:<20} {:>8} {:>9.4} {:>8.4} {:>9.4} {:>7.4} {:>9.4} {:>7.2}",
                s.strategy.name(),
                s.segments,
                s.coverage_mean,
                s.coverage_p10,
                s.precision_mean,
                s.recall_mean,
                s.recall_pre_budget_mean,
                s.context_size_mean
            );
        }
        let c = &self.calibration;
        let _ = writeln!(
            out,
            "# heuristic vs co-visibility over {} pairs: tp {} fp {} fn {} tn {}; recall* = before budget",
            c.pairs, c.true_positive, c.false_positive, c.false_negative, c.true_negative
        );
        if let Some(t) = &self.timing {
            for l in t {
                let _ = writeln!(
                    out,
                    "# latency {:<20} {:>10.2} us",
                    l.strategy.name(),
                    l.mean_query_latency_us
                );
            }
        }
        out
    }
}

/// Per-segment series as CSV, one row per retrieval.
pub fn write_series_csv<W: io::Write>(rows: &[SegmentRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "case",
        "strategy",
        "seed",
        "segment",
        "target_frame",
        "context_size",
        "coverage",
        "precision",
        "recall",
        "recall_pre_budget",
    ])?;
    for r in rows {
        wr.write_record([
            r.case.clone(),
            r.strategy.name().to_string(),
            r.seed.to_string(),
            r.segment.to_string(),
            r.target_frame.to_string(),
            r.context_size.to_string(),
            crate::json::format_f64(r.coverage),
            crate::json::format_f64(r.precision),
            crate::json::format_f64(r.recall),
            crate::json::format_f64(r.recall_pre_budget),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

impl EvalRun {
    pub fn series_csv(&self) -> String {
        let mut buf = Vec::new();
        write_series_csv(&self.series, &mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
