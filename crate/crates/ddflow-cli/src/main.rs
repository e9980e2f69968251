//! Command line front end: compile or load a graph, resolve source and
//! sink selectors, run the taint query, and print flows as text or JSON.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddflow_core::bench::{
    load_manifest, metric_cell, parse_sweep, run_corpus, BenchConfig, BenchOutcome,
};
use ddflow_core::cpg::{load_cpg, Cpg, NodeId};
use ddflow_core::engine::{run_query, FlowReport, TaintQuery};
use ddflow_core::matcher::{parse_matcher, resolve};
use ddflow_core::minilang::{compile, merge, parse};
use ddflow_core::semantics::SemanticsRegistry;
use serde_json::json;
use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ddflow", version, about = "Taint tracking over explicit data dependencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a taint query against sources and load a report of flows.
    Run(RunArgs),
    /// Score and time a manifest of labeled cases.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["mini", "cpg"])))]
struct RunArgs {
    /// MiniLang source files, analyzed together as one program.
    #[arg(long = "mini", value_name = "FILE", num_args = 1..)]
    mini: Vec<PathBuf>,
    /// A serialized graph to query instead of compiling sources.
    #[arg(long, value_name = "FILE")]
    cpg: Option<PathBuf>,
    /// Source selector (call:NAME, arg:NAME:I, param:FN:I, ret:FN); repeatable.
    #[arg(long = "sources", value_name = "SELECTOR")]
    sources: Vec<String>,
    /// Sink selector; repeatable.
    #[arg(long = "sinks", value_name = "SELECTOR")]
    sinks: Vec<String>,
    /// Semantics rule files; later files shadow earlier ones.
    #[arg(long = "semantics", value_name = "FILE")]
    semantics: Vec<PathBuf>,
    /// Cross-method expansion budget; deeper boundaries widen.
    #[arg(long, value_name = "K", default_value_t = 5)]
    depth: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads; 0 uses every available core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Keep operator calls out of selector matches.
    #[arg(long = "no-operators")]
    no_operators: bool,
    /// Treat rule method names as anchored regular expressions.
    #[arg(long = "semantics-regex")]
    semantics_regex: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Case manifest (JSON) with files, selectors, and expectations.
    #[arg(value_name = "MANIFEST")]
    manifest: PathBuf,
    /// Full corpus sweeps to time.
    #[arg(long, value_name = "N", default_value_t = 10)]
    iterations: u32,
    #[arg(long, value_name = "K", default_value_t = 5)]
    depth: u32,
    /// Score an inclusive range of depths, one row per depth.
    #[arg(long = "sweep-k", value_name = "A..B")]
    sweep_k: Option<String>,
    /// Solve cases on parallel workers instead of one by one.
    #[arg(long = "parallel-cases")]
    parallel_cases: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads per query; 0 uses every available core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Bench(args) => bench_command(args),
    }
}

fn run_command(args: RunArgs) -> i32 {
    if args.depth == 0 {
        eprintln!("error: --depth must be at least 1");
        return 1;
    }
    let mut selectors = Vec::new();
    for (what, patterns) in [("source", &args.sources), ("sink", &args.sinks)] {
        for pattern in patterns {
            match parse_matcher(pattern) {
                Ok(m) => selectors.push((what, pattern.clone(), m)),
                Err(e) => {
                    eprintln!("error: {what} selector `{pattern}`: {e}");
                    return 1;
                }
            }
        }
    }

    let cpg = match build_graph(&args) {
        Ok(cpg) => cpg,
        Err(code) => return code,
    };
    let mut registry = SemanticsRegistry::with_defaults();
    registry.set_regex_names(args.semantics_regex);
    for path in &args.semantics {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return 2;
            }
        };
        if let Err(diagnostics) = registry.load(&text) {
            for d in diagnostics {
                eprintln!("{}: {d}", path.display());
            }
            return 2;
        }
    }

    let mut sources: BTreeSet<NodeId> = BTreeSet::new();
    let mut sinks: Vec<NodeId> = Vec::new();
    for (what, pattern, matcher) in &selectors {
        let nodes = resolve(&cpg, matcher, args.no_operators);
        if nodes.is_empty() {
            eprintln!("warning: {what} matcher `{pattern}` resolved to 0 nodes");
        }
        match *what {
            "source" => sources.extend(nodes),
            _ => sinks.extend(nodes),
        }
    }

    let report = match run_query(&TaintQuery {
        cpg: &cpg,
        registry: &registry,
        sources,
        sinks,
        max_call_depth: args.depth,
        jobs: args.jobs,
    }) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match args.format {
        Format::Text => print_text_report(&report),
        Format::Json => println!("{}", report_json(&report)),
    }
    0
}

fn build_graph(args: &RunArgs) -> Result<Cpg, i32> {
    if let Some(path) = &args.cpg {
        let text = fs::read_to_string(path).map_err(|e| {
            eprintln!("error: cannot read {}: {e}", path.display());
            2
        })?;
        return load_cpg(&text).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            2
        });
    }
    let mut programs = Vec::new();
    for path in &args.mini {
        let text = fs::read_to_string(path).map_err(|e| {
            eprintln!("error: cannot read {}: {e}", path.display());
            2
        })?;
        let program = parse(&text).map_err(|diagnostics| {
            for d in diagnostics {
                eprintln!("{}:{d}", path.display());
            }
            2
        })?;
        programs.push(program);
    }
    let program = merge(programs).map_err(|diagnostics| {
        for d in diagnostics {
            eprintln!("error: {d}");
        }
        2
    })?;
    compile(&program).map_err(|e| {
        eprintln!("error: {e}");
        2
    })
}

fn print_text_report(report: &FlowReport) {
    for (i, flow) in report.flows.iter().enumerate() {
        if flow.widened {
            println!("flow {} (widened)", i + 1);
        } else {
            println!("flow {}", i + 1);
        }
        for element in &flow.elements {
            println!("    {}:{}  {}", element.method, element.line, element.code);
        }
    }
    println!(
        "flows: {}  tasks: {}  elapsed: {} ms",
        report.flows.len(),
        report.stats.tasks,
        report.stats.elapsed_ms
    );
}

fn report_json(report: &FlowReport) -> String {
    let flows: Vec<_> = report
        .flows
        .iter()
        .map(|flow| {
            let elements: Vec<_> = flow
                .elements
                .iter()
                .map(|e| {
                    json!({
                        "id": e.id,
                        "code": e.code,
                        "line": e.line,
                        "method": e.method,
                    })
                })
                .collect();
            json!({
                "source": elements.first().cloned().unwrap_or(serde_json::Value::Null),
                "sink": elements.last().cloned().unwrap_or(serde_json::Value::Null),
                "widened": flow.widened,
                "elements": elements,
            })
        })
        .collect();
    let value = json!({
        "version": 1,
        "flows": flows,
        "stats": {
            "tasks": report.stats.tasks,
            "elapsedMs": report.stats.elapsed_ms,
        },
    });
    serde_json::to_string_pretty(&value).expect("report serializes")
}

fn bench_command(args: BenchArgs) -> i32 {
    let cases = match load_manifest(&args.manifest) {
        Ok(cases) => cases,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(range) = &args.sweep_k {
        let Some((lo, hi)) = parse_sweep(range) else {
            eprintln!("error: --sweep-k expects an inclusive range like 1..8");
            return 1;
        };
        let mut rows = Vec::new();
        for k in lo..=hi {
            if k < 1 {
                rows.push((k, None));
                continue;
            }
            let outcome = run_corpus(
                &cases,
                &BenchConfig {
                    iterations: args.iterations,
                    depth: k as u32,
                    jobs: args.jobs,
                    parallel_cases: args.parallel_cases,
                },
            );
            rows.push((k, Some(outcome)));
        }
        match args.format {
            Format::Text => print_sweep_text(&rows),
            Format::Json => println!("{}", sweep_json(&rows)),
        }
        return 0;
    }
    let outcome = run_corpus(
        &cases,
        &BenchConfig {
            iterations: args.iterations,
            depth: args.depth,
            jobs: args.jobs,
            parallel_cases: args.parallel_cases,
        },
    );
    match args.format {
        Format::Text => print_bench_text(&outcome, args.iterations),
        Format::Json => println!("{}", bench_json(&outcome)),
    }
    0
}

fn print_bench_text(outcome: &BenchOutcome, iterations: u32) {
    let width = outcome.cases.iter().map(|c| c.label.len()).max().unwrap_or(5).max(5);
    for case in &outcome.cases {
        let found = if case.error.is_some() {
            "error"
        } else if case.flows > 0 {
            "flow"
        } else {
            "no-flow"
        };
        let verdict = if case.passed() { "pass" } else { "fail" };
        println!(
            "{:<width$}  expected {:<7}  found {:<7}  {}",
            case.label,
            case.expected.as_str(),
            found,
            verdict,
        );
        if let Some(message) = &case.error {
            println!("{:<width$}  {message}", "");
        }
    }
    let m = outcome.matrix;
    println!(
        "tp {}  tn {}  fp {}  fn {}",
        m.true_positives, m.true_negatives, m.false_positives, m.false_negatives
    );
    println!(
        "f1 {}  informedness {}",
        metric_cell(m.f1()),
        metric_cell(m.youden())
    );
    println!(
        "mean {:.1} ms  stddev {:.1} ms  ({} iterations)",
        outcome.mean_ms, outcome.stddev_ms, iterations
    );
}

fn print_sweep_text(rows: &[(i64, Option<BenchOutcome>)]) {
    println!("{:<4}  {:>3} {:>3} {:>3} {:>3}  {:>6}  {:>6}  {:>9}", "k", "tp", "tn", "fp", "fn", "f1", "inf", "mean-ms");
    for (k, outcome) in rows {
        match outcome {
            None => println!("{k:<4}  n/a"),
            Some(o) => {
                let m = o.matrix;
                println!(
                    "{:<4}  {:>3} {:>3} {:>3} {:>3}  {:>6}  {:>6}  {:>9.1}",
                    k,
                    m.true_positives,
                    m.true_negatives,
                    m.false_positives,
                    m.false_negatives,
                    metric_cell(m.f1()),
                    metric_cell(m.youden()),
                    o.mean_ms,
                );
            }
        }
    }
}

fn bench_json(outcome: &BenchOutcome) -> String {
    let value = json!({
        "version": 1,
        "cases": outcome.cases.iter().map(|c| {
            json!({
                "label": c.label,
                "expected": c.expected.as_str(),
                "flows": c.flows,
                "error": c.error,
                "passed": c.passed(),
            })
        }).collect::<Vec<_>>(),
        "matrix": matrix_json(outcome),
        "meanMs": outcome.mean_ms,
        "stddevMs": outcome.stddev_ms,
    });
    serde_json::to_string_pretty(&value).expect("bench report serializes")
}

fn sweep_json(rows: &[(i64, Option<BenchOutcome>)]) -> String {
    let value = json!({
        "version": 1,
        "sweep": rows.iter().map(|(k, outcome)| match outcome {
            None => json!({ "k": k, "defined": false }),
            Some(o) => {
                let mut row = matrix_json(o);
                row["k"] = json!(k);
                row["defined"] = json!(true);
                row["meanMs"] = json!(o.mean_ms);
                row
            }
        }).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&value).expect("sweep report serializes")
}

fn matrix_json(outcome: &BenchOutcome) -> serde_json::Value {
    let m = outcome.matrix;
    json!({
        "tp": m.true_positives,
        "tn": m.true_negatives,
        "fp": m.false_positives,
        "fn": m.false_negatives,
        "f1": m.f1(),
        "informedness": m.youden(),
    })
}
