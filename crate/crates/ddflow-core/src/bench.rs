//! Corpus benchmarking: run a manifest of labeled cases, score the
//! outcomes against their expectations, and time repeated sweeps.

use crate::engine::{run_query, TaintQuery};
use crate::matcher::{parse_matcher, resolve};
use crate::minilang::compile_source;
use crate::semantics::SemanticsRegistry;
use serde::Deserialize;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
pub enum Expectation {
    #[serde(rename = "flow")]
    Flow,
    #[serde(rename = "no-flow")]
    NoFlow,
}

impl Expectation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Expectation::Flow => "flow",
            Expectation::NoFlow => "no-flow",
        }
    }
}

#[derive(Deserialize)]
struct Manifest {
    cases: Vec<CaseSpec>,
}

#[derive(Deserialize)]
struct CaseSpec {
    file: String,
    sources: Vec<String>,
    sinks: Vec<String>,
    #[serde(default)]
    semantics: Option<String>,
    expected: Expectation,
    label: String,
}

/// A manifest entry with its paths resolved against the manifest's
/// directory.
#[derive(Clone, Debug)]
pub struct ResolvedCase {
    pub label: String,
    pub file: PathBuf,
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
    pub semantics: Option<PathBuf>,
    pub expected: Expectation,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ResolvedCase>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(manifest
        .cases
        .into_iter()
        .map(|c| ResolvedCase {
            label: c.label,
            file: base.join(c.file),
            sources: c.sources,
            sinks: c.sinks,
            semantics: c.semantics.map(|s| base.join(s)),
            expected: c.expected,
        })
        .collect())
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct ConfusionMatrix {
    pub true_positives: u32,
    pub true_negatives: u32,
    pub false_positives: u32,
    pub false_negatives: u32,
}

impl ConfusionMatrix {
    pub fn new(tp: u32, tn: u32, fp: u32, fneg: u32) -> Self {
        ConfusionMatrix {
            true_positives: tp,
            true_negatives: tn,
            false_positives: fp,
            false_negatives: fneg,
        }
    }

    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.true_positives + self.false_positives + self.false_negatives;
        if denom == 0 {
            return None;
        }
        Some(2.0 * f64::from(self.true_positives) / f64::from(denom))
    }

    /// Informedness: recall on positives plus recall on negatives,
    /// minus one. Undefined when either class is empty.
    pub fn youden(&self) -> Option<f64> {
        let positives = self.true_positives + self.false_negatives;
        let negatives = self.true_negatives + self.false_positives;
        if positives == 0 || negatives == 0 {
            return None;
        }
        Some(
            f64::from(self.true_positives) / f64::from(positives)
                + f64::from(self.true_negatives) / f64::from(negatives)
                - 1.0,
        )
    }
}

/// Render an optional metric with three decimals, or "n/a" when the
/// metric is undefined.
pub fn metric_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "n/a".to_string(),
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub label: String,
    pub expected: Expectation,
    pub flows: usize,
    pub error: Option<String>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        match self.expected {
            Expectation::Flow => self.error.is_none() && self.flows > 0,
            Expectation::NoFlow => self.error.is_none() && self.flows == 0,
        }
    }
}

/// Score results against their expectations. A case that errored fails
/// whichever expectation it carried.
pub fn matrix_of(results: &[CaseResult]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for r in results {
        match (r.expected, r.passed()) {
            (Expectation::Flow, true) => m.true_positives += 1,
            (Expectation::Flow, false) => m.false_negatives += 1,
            (Expectation::NoFlow, true) => m.true_negatives += 1,
            (Expectation::NoFlow, false) => m.false_positives += 1,
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub iterations: u32,
    pub depth: u32,
    pub jobs: usize,
    pub parallel_cases: bool,
}

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub cases: Vec<CaseResult>,
    pub matrix: ConfusionMatrix,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

/// Run every case `iterations` times and report the outcome of the last
/// sweep together with per-sweep timing.
pub fn run_corpus(cases: &[ResolvedCase], config: &BenchConfig) -> BenchOutcome {
    let iterations = config.iterations.max(1);
    let mut times = Vec::with_capacity(iterations as usize);
    let mut results = Vec::new();
    for _ in 0..iterations {
        let start = Instant::now();
        results = if config.parallel_cases {
            run_cases_parallel(cases, config)
        } else {
            cases.iter().map(|c| run_case(c, config.depth, config.jobs)).collect()
        };
        times.push(start.elapsed().as_secs_f64() * 1000.0);
    }
    let (mean_ms, stddev_ms) = mean_stddev(&times);
    BenchOutcome { matrix: matrix_of(&results), cases: results, mean_ms, stddev_ms }
}

fn run_cases_parallel(cases: &[ResolvedCase], config: &BenchConfig) -> Vec<CaseResult> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cases.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = crossbeam_channel::unbounded();
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cases.len() {
                    break;
                }
                // Cases already run side by side, so each query stays
                // single-threaded.
                let result = run_case(&cases[i], config.depth, 1);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut slots: Vec<Option<CaseResult>> = vec![None; cases.len()];
        for (i, result) in rx {
            slots[i] = Some(result);
        }
        slots.into_iter().map(|s| s.expect("every case was solved")).collect()
    })
}

fn run_case(case: &ResolvedCase, depth: u32, jobs: usize) -> CaseResult {
    let result = solve_case(case, depth, jobs);
    match result {
        Ok(flows) => {
            CaseResult { label: case.label.clone(), expected: case.expected, flows, error: None }
        }
        Err(message) => CaseResult {
            label: case.label.clone(),
            expected: case.expected,
            flows: 0,
            error: Some(message),
        },
    }
}

fn solve_case(case: &ResolvedCase, depth: u32, jobs: usize) -> Result<usize, String> {
    let text = fs::read_to_string(&case.file)
        .map_err(|e| format!("{}: {e}", case.file.display()))?;
    let cpg = compile_source(&text).map_err(|e| e.to_string())?;
    let mut registry = SemanticsRegistry::with_defaults();
    if let Some(sem_path) = &case.semantics {
        let sem = fs::read_to_string(sem_path)
            .map_err(|e| format!("{}: {e}", sem_path.display()))?;
        registry.load(&sem).map_err(|errs| {
            errs.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
        })?;
    }
    let mut sources = BTreeSet::new();
    for pattern in &case.sources {
        let m = parse_matcher(pattern).map_err(|e| e.to_string())?;
        sources.extend(resolve(&cpg, &m, true));
    }
    let mut sinks = Vec::new();
    for pattern in &case.sinks {
        let m = parse_matcher(pattern).map_err(|e| e.to_string())?;
        sinks.extend(resolve(&cpg, &m, true));
    }
    let report = run_query(&TaintQuery {
        cpg: &cpg,
        registry: &registry,
        sources,
        sinks,
        max_call_depth: depth,
        jobs,
    })
    .map_err(|e| e.to_string())?;
    Ok(report.flows.len())
}

/// Parse an inclusive depth range written as `A..B`.
pub fn parse_sweep(text: &str) -> Option<(i64, i64)> {
    let (a, b) = text.split_once("..")?;
    let a: i64 = a.trim().parse().ok()?;
    let b: i64 = b.trim().parse().ok()?;
    (a <= b).then_some((a, b))
}

fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, variance.sqrt())
}
