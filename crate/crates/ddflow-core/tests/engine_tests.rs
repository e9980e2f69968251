//! End-to-end query checks: exact element sequences on the worked
//! example, widening stubs at the depth limit, dispatch through
//! method-valued receivers, expansion into callees that contain
//! sources, and scheduling independence.

use ddflow_core::cpg::{
    load_cpg, serialize_cpg, Cpg, EdgeKind, NodeAttrs, NodeId, NodeKind,
};
use ddflow_core::engine::{run_query, FlowReport, TaintQuery};
use ddflow_core::matcher::{parse_matcher, resolve};
use ddflow_core::minilang::compile_source;
use ddflow_core::semantics::SemanticsRegistry;
use std::collections::BTreeSet;
use std::path::PathBuf;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn query(
    cpg: &Cpg,
    registry: &SemanticsRegistry,
    sources: &str,
    sinks: &str,
    depth: u32,
    jobs: usize,
) -> FlowReport {
    let source_nodes: BTreeSet<NodeId> =
        resolve(cpg, &parse_matcher(sources).unwrap(), true).into_iter().collect();
    let sink_nodes = resolve(cpg, &parse_matcher(sinks).unwrap(), true);
    run_query(&TaintQuery {
        cpg,
        registry,
        sources: source_nodes,
        sinks: sink_nodes,
        max_call_depth: depth,
        jobs,
    })
    .unwrap()
}

type Elem = (String, String, u32);

fn triples(report: &FlowReport) -> Vec<Vec<Elem>> {
    report
        .flows
        .iter()
        .map(|f| {
            f.elements
                .iter()
                .map(|e| (e.code.clone(), e.method.clone(), e.line))
                .collect()
        })
        .collect()
}

fn example(rules: Option<&str>) -> (Cpg, SemanticsRegistry) {
    let text = std::fs::read_to_string(fixture("example.mini")).unwrap();
    let cpg = compile_source(&text).unwrap();
    let mut registry = SemanticsRegistry::with_defaults();
    if let Some(name) = rules {
        registry.load(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
    }
    (cpg, registry)
}

fn t(code: &str, method: &str, line: u32) -> Elem {
    (code.to_string(), method.to_string(), line)
}

#[test]
fn worked_example_walks_are_reported_element_by_element() {
    let through_transform = vec![
        t("Source.getValue()", "foo", 7),
        t("u = Source.getValue()", "foo", 7),
        t("u", "foo", 10),
        t("u.transform(v)", "foo", 10),
        t("result = u.transform(v)", "foo", 10),
        t("result", "foo", 11),
        t("x", "bar", 15),
        t("x", "bar", 16),
    ];
    let through_second_argument = vec![
        t("Source.getValue()", "foo", 7),
        t("u = Source.getValue()", "foo", 7),
        t("u", "foo", 10),
        t("v", "foo", 10),
        t("v", "foo", 11),
        t("y", "bar", 15),
        t("y", "bar", 17),
    ];

    let expectations: [(Option<&str>, Vec<Vec<Elem>>); 3] = [
        (None, vec![through_transform.clone(), through_second_argument.clone()]),
        (Some("eg1.sem"), vec![through_transform.clone()]),
        (Some("eg2.sem"), vec![through_transform, through_second_argument]),
    ];
    for (rules, expected) in expectations {
        let (cpg, registry) = example(rules);
        let report = query(&cpg, &registry, "call:Source.getValue", "arg:Sink.addValue:1", 5, 0);
        assert_eq!(triples(&report), expected, "rules {rules:?}");
        assert!(report.flows.iter().all(|f| !f.widened), "rules {rules:?}");
    }
}

#[test]
fn depth_one_cuts_the_example_at_its_parameters() {
    let (cpg, registry) = example(None);
    let report = query(&cpg, &registry, "call:Source.getValue", "arg:Sink.addValue:1", 1, 0);
    let expected = vec![
        vec![t("x", "bar", 15), t("x", "bar", 16)],
        vec![t("y", "bar", 15), t("y", "bar", 17)],
    ];
    assert_eq!(triples(&report), expected);
    assert!(report.flows.iter().all(|f| f.widened), "cut walks are marked");
}

/// Builds a graph by hand in which the only route from source to sink runs
/// through a method passed as a value: `main` calls `w.run(x)` where `w`
/// references the defined method `worker`, whose parameter reaches the
/// sink. No CALL edge connects the call site to `worker`, so the walk can
/// only cross the boundary by following the receiver's REF edge.
#[test]
fn method_valued_receivers_route_walks_into_the_referenced_body() {
    let mut g = Cpg::new();
    let main = g
        .add_node(NodeKind::Method, NodeAttrs::new().name("main").full_name("main").line(1))
        .unwrap();
    let worker = g
        .add_node(NodeKind::Method, NodeAttrs::new().name("worker").full_name("worker").line(5))
        .unwrap();
    let stub_run = g
        .add_node(
            NodeKind::ExternalMethodStub,
            NodeAttrs::new().name("run").full_name("Obj.run"),
        )
        .unwrap();
    let stub_src = g
        .add_node(
            NodeKind::ExternalMethodStub,
            NodeAttrs::new().name("get").full_name("Source.get"),
        )
        .unwrap();
    let stub_snk = g
        .add_node(
            NodeKind::ExternalMethodStub,
            NodeAttrs::new().name("put").full_name("Snk.put"),
        )
        .unwrap();

    let src_call = g
        .add_node(
            NodeKind::Call,
            NodeAttrs::new().code("Source.get()").name("get").line(2).method(main),
        )
        .unwrap();
    let run_call = g
        .add_node(
            NodeKind::Call,
            NodeAttrs::new().code("w.run(x)").name("run").line(3).method(main),
        )
        .unwrap();
    let receiver = g
        .add_node(
            NodeKind::Identifier,
            NodeAttrs::new().code("w").name("w").argument_index(0).line(3).method(main),
        )
        .unwrap();
    let x_arg = g
        .add_node(
            NodeKind::Identifier,
            NodeAttrs::new().code("x").name("x").argument_index(1).line(3).method(main),
        )
        .unwrap();

    let p_param = g
        .add_node(
            NodeKind::ParameterIn,
            NodeAttrs::new().code("p").name("p").argument_index(1).line(5).method(worker),
        )
        .unwrap();
    let _exit = g
        .add_node(NodeKind::MethodReturn, NodeAttrs::new().code("RET").line(5).method(worker))
        .unwrap();
    let put_call = g
        .add_node(
            NodeKind::Call,
            NodeAttrs::new().code("Snk.put(p)").name("put").line(6).method(worker),
        )
        .unwrap();
    let p_use = g
        .add_node(
            NodeKind::Identifier,
            NodeAttrs::new().code("p").name("p").argument_index(1).line(6).method(worker),
        )
        .unwrap();

    g.add_edge(src_call, stub_src, EdgeKind::Call).unwrap();
    g.add_edge(run_call, stub_run, EdgeKind::Call).unwrap();
    g.add_edge(put_call, stub_snk, EdgeKind::Call).unwrap();
    for (call, arg) in [(run_call, receiver), (run_call, x_arg), (put_call, p_use)] {
        g.add_edge(call, arg, EdgeKind::Ast).unwrap();
        g.add_edge(call, arg, EdgeKind::Argument).unwrap();
    }
    g.add_edge(receiver, worker, EdgeKind::Ref).unwrap();
    g.add_edge(src_call, x_arg, EdgeKind::Ddg("x".into())).unwrap();
    g.add_edge(p_param, p_use, EdgeKind::Ddg("p".into())).unwrap();

    let reloaded = load_cpg(&serialize_cpg(&g)).unwrap();
    let registry = SemanticsRegistry::with_defaults();
    for cpg in [&g, &reloaded] {
        let report = run_query(&TaintQuery {
            cpg,
            registry: &registry,
            sources: BTreeSet::from([src_call]),
            sinks: vec![p_use],
            max_call_depth: 5,
            jobs: 1,
        })
        .unwrap();
        assert_eq!(
            triples(&report),
            vec![vec![
                t("Source.get()", "main", 2),
                t("x", "main", 3),
                t("p", "worker", 5),
                t("p", "worker", 6),
            ]]
        );
        assert!(!report.flows[0].widened);
        assert_eq!(report.stats.tasks, 2, "the sink seed plus one caller-side task");
    }
}

#[test]
fn sources_behind_internal_calls_are_found_by_expansion() {
    let cpg = compile_source(
        "extern Src.get();\n\
         extern Snk.put(v);\n\
         \n\
         fn produce() {\n\
         \x20   w = Src.get();\n\
         \x20   return w;\n\
         }\n\
         \n\
         fn main() {\n\
         \x20   r = produce();\n\
         \x20   Snk.put(r);\n\
         }\n",
    )
    .unwrap();
    let registry = SemanticsRegistry::with_defaults();
    let mut sources: BTreeSet<NodeId> =
        resolve(&cpg, &parse_matcher("call:produce").unwrap(), true).into_iter().collect();
    sources.extend(resolve(&cpg, &parse_matcher("call:Src.get").unwrap(), true));
    let sinks = resolve(&cpg, &parse_matcher("arg:Snk.put:1").unwrap(), true);
    let report = run_query(&TaintQuery {
        cpg: &cpg,
        registry: &registry,
        sources,
        sinks,
        max_call_depth: 5,
        jobs: 1,
    })
    .unwrap();

    let codes: Vec<Vec<String>> = report
        .flows
        .iter()
        .map(|f| f.elements.iter().map(|e| e.code.clone()).collect())
        .collect();
    assert_eq!(
        codes,
        vec![
            vec![
                "Src.get()".to_string(),
                "w = Src.get()".into(),
                "w".into(),
                "RET".into(),
                "produce()".into(),
                "r = produce()".into(),
                "r".into(),
            ],
            vec!["produce()".to_string(), "r = produce()".into(), "r".into()],
        ],
        "a source at a call is reported on its own and still expanded through"
    );
    assert!(report.flows.iter().all(|f| !f.widened));
}

#[test]
fn worker_counts_never_change_the_report() {
    let cases: [(&str, Option<&str>, &str, &str, u32); 3] = [
        ("example.mini", Some("eg2.sem"), "call:Source.getValue", "arg:Sink.addValue:1", 5),
        ("wrappers/wrap_04.mini", None, "call:Source.getValue", "arg:Sink.addValue:1", 5),
        ("wrappers/wrap_07.mini", None, "call:Source.getValue", "arg:Sink.addValue:1", 5),
    ];
    for (file, rules, sources, sinks, depth) in cases {
        let text = std::fs::read_to_string(fixture(file)).unwrap();
        let cpg = compile_source(&text).unwrap();
        let mut registry = SemanticsRegistry::with_defaults();
        if let Some(name) = rules {
            registry.load(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
        }
        let baseline = query(&cpg, &registry, sources, sinks, depth, 1);
        assert!(!baseline.flows.is_empty(), "{file} must exercise the walk");
        let base_flows: Vec<(Vec<NodeId>, bool)> = baseline
            .flows
            .iter()
            .map(|f| (f.elements.iter().map(|e| e.id).collect(), f.widened))
            .collect();
        for jobs in [2, 8] {
            let report = query(&cpg, &registry, sources, sinks, depth, jobs);
            let flows: Vec<(Vec<NodeId>, bool)> = report
                .flows
                .iter()
                .map(|f| (f.elements.iter().map(|e| e.id).collect(), f.widened))
                .collect();
            assert_eq!(flows, base_flows, "{file} with {jobs} workers");
            assert_eq!(report.stats.tasks, baseline.stats.tasks, "{file} with {jobs} workers");
        }
    }
}
