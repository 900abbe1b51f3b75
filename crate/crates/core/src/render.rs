//! Text and JSON renderings of analysis results and scenario reports.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::commutativity::CommutativityTable;
use crate::error::Result;
use crate::extraction::extract_all_facts;
use crate::scenario::{ConcurrencyReport, TraceStep};
use crate::schema::ClassModel;
use crate::tav_graph::{build_lbr_graph, compute_tav_list};

/// Per-class analysis listing: DAV, DSC, PSC, and TAV of every method.
pub fn analysis_text(model: &ClassModel, classes: &[&str]) -> Result<String> {
    let mut out = String::new();
    for (i, class) in classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let fields = model.field_names(class)?.join(", ");
        let _ = writeln!(out, "class {class} [fields: {fields}]");
        let tavs = compute_tav_list(model, class)?;
        let table = model.methods(class)?;
        let all_facts = extract_all_facts(model, class)?;
        for ((method, facts), tav) in table.names().iter().zip(&all_facts).zip(&tavs) {
            let defined_in = table.defining_class(method).expect("listed method");
            let _ = writeln!(out, "  {method} (defined in {defined_in})");
            let _ = writeln!(out, "    DAV = {}", facts.dav);
            out.push_str("    DSC = {");
            for (k, m) in facts.dsc.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(m);
            }
            out.push_str("}\n    PSC = {");
            for (k, p) in facts.psc.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{p}");
            }
            out.push_str("}\n");
            let _ = writeln!(out, "    TAV = {tav}");
        }
    }
    Ok(out)
}

pub fn analysis_json(model: &ClassModel, classes: &[&str]) -> Result<Value> {
    let mut class_entries = Vec::new();
    for class in classes {
        let tavs = compute_tav_list(model, class)?;
        let table = model.methods(class)?;
        let all_facts = extract_all_facts(model, class)?;
        let mut methods = Vec::new();
        for ((method, facts), tav) in table.names().iter().zip(&all_facts).zip(&tavs) {
            methods.push(json!({
                "method": method,
                "defined_in": table.defining_class(method),
                "dav": facts.dav.to_json(),
                "dsc": facts.dsc.iter().collect::<Vec<_>>(),
                "psc": facts.psc.iter().map(|p| json!({
                    "class": p.class,
                    "method": p.method,
                })).collect::<Vec<_>>(),
                "tav": tav.to_json(),
            }));
        }
        class_entries.push(json!({
            "class": class,
            "fields": model.field_names(class)?,
            "methods": methods,
        }));
    }
    Ok(json!({ "classes": class_entries }))
}

/// Graph listing: vertices, edges, and the TAV of every vertex.
pub fn graph_text(model: &ClassModel, class: &str) -> Result<String> {
    let graph = build_lbr_graph(model, class)?;
    let tavs = crate::tav_graph::compute_vertex_tavs(&graph);
    let mut out = String::new();
    out.push_str(&format!("late-binding resolution graph of class {class}\n"));
    out.push_str(&format!("vertices ({}):\n", graph.vertex_count()));
    let mut vs: Vec<usize> = (0..graph.vertex_count()).collect();
    vs.sort_by_key(|&v| graph.vertices()[v].to_string());
    for &v in &vs {
        out.push_str(&format!("  {}\n", graph.vertices()[v]));
    }
    out.push_str(&format!("edges ({}):\n", graph.edge_count()));
    let mut edges: Vec<(String, String)> = graph
        .edge_pairs()
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    edges.sort();
    for (from, to) in &edges {
        out.push_str(&format!("  {from} -> {to}\n"));
    }
    out.push_str("transitive access vectors:\n");
    for &v in &vs {
        out.push_str(&format!("  TAV {} = {}\n", graph.vertices()[v], tavs[v]));
    }
    Ok(out)
}

pub fn graph_json(model: &ClassModel, class: &str) -> Result<Value> {
    let graph = build_lbr_graph(model, class)?;
    let tavs = crate::tav_graph::compute_vertex_tavs(&graph);
    let mut vs: Vec<usize> = (0..graph.vertex_count()).collect();
    vs.sort_by_key(|&v| graph.vertices()[v].to_string());
    let vertices: Vec<Value> = vs
        .iter()
        .map(|&v| {
            let m = &graph.vertices()[v];
            json!({ "class": m.class, "method": m.method, "tav": tavs[v].to_json() })
        })
        .collect();
    let mut edges: Vec<(String, String)> = graph
        .edge_pairs()
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    edges.sort();
    let edges: Vec<Value> = edges
        .into_iter()
        .map(|(from, to)| json!({ "from": from, "to": to }))
        .collect();
    Ok(json!({
        "class": class,
        "vertices": vertices,
        "edges": edges,
    }))
}

/// DOT rendering of the late-binding resolution graph.
pub fn graph_dot(model: &ClassModel, class: &str) -> Result<String> {
    Ok(build_lbr_graph(model, class)?.to_dot())
}

/// The commutativity matrix in a yes/no grid.
pub fn table_text(table: &CommutativityTable) -> String {
    let methods = table.methods();
    let width = methods.iter().map(|m| m.len()).max().unwrap_or(0).max(3);
    let mut out = String::new();
    out.push_str(&format!("commutativity of class {}\n", table.class()));
    let mut header = format!("{:w$}", "", w = width + 2);
    for m in methods {
        header.push_str(&format!("{m:<w$}", w = width + 2));
    }
    out.push_str(header.trim_end());
    out.push('\n');
    for (i, m) in methods.iter().enumerate() {
        let mut row = format!("{m:<w$}", w = width + 2);
        for j in 0..methods.len() {
            let cell = if table.matrix()[i][j] { "yes" } else { "no" };
            row.push_str(&format!("{cell:<w$}", w = width + 2));
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out
}

fn trace_step_json(step: &TraceStep) -> Value {
    match step {
        TraceStep::Granted { txn, request } => {
            json!({ "step": "granted", "txn": txn, "request": request })
        }
        TraceStep::Blocked { txn, request, on } => {
            json!({ "step": "blocked", "txn": txn, "request": request,
                    "on": on.iter().collect::<Vec<_>>() })
        }
        TraceStep::Resumed { txn, request } => {
            json!({ "step": "resumed", "txn": txn, "request": request })
        }
        TraceStep::Committed { txn } => json!({ "step": "committed", "txn": txn }),
        TraceStep::Aborted { txn, deadlock } => {
            json!({ "step": "aborted", "txn": txn, "deadlock": deadlock })
        }
    }
}

fn trace_step_text(step: &TraceStep) -> String {
    match step {
        TraceStep::Granted { txn, request } => format!("{txn} request {request} granted"),
        TraceStep::Blocked { txn, request, on } => {
            let on: Vec<&str> = on.iter().map(String::as_str).collect();
            format!("{txn} request {request} blocked by {}", on.join(", "))
        }
        TraceStep::Resumed { txn, request } => format!("{txn} request {request} resumed"),
        TraceStep::Committed { txn } => format!("{txn} committed"),
        TraceStep::Aborted { txn, deadlock } => {
            if *deadlock {
                format!("{txn} aborted (deadlock victim)")
            } else {
                format!("{txn} aborted")
            }
        }
    }
}

/// Human-readable scenario report.
pub fn simulate_text(report: &ConcurrencyReport, with_trace: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "transactions: {}\n",
        report.transactions.join(", ")
    ));

    out.push_str("conflicts:\n");
    let mut any = false;
    for (i, a) in report.transactions.iter().enumerate() {
        for (j, b) in report.transactions.iter().enumerate() {
            if j <= i {
                continue;
            }
            if let Some(c) = &report.conflicts[i][j] {
                any = true;
                let resource = c.resource.replace(':', " ");
                out.push_str(&format!(
                    "  {a} x {b}: {resource}, modes ({}, {})\n",
                    c.mode_a, c.mode_b
                ));
            }
        }
    }
    if !any {
        out.push_str("  none\n");
    }

    out.push_str("maximal compatible sets:\n");
    for set in &report.maximal_sets {
        out.push_str(&format!("  {{{}}}\n", set.join(", ")));
    }

    if with_trace {
        out.push_str("trace:\n");
        for (i, step) in report.trace.iter().enumerate() {
            out.push_str(&format!("  [{i}] {}\n", trace_step_text(step)));
        }
        out.push_str("events:\n");
        for e in &report.events {
            out.push_str(&format!("  {}\n", e.to_json()));
        }
    }
    out
}

pub fn simulate_json(report: &ConcurrencyReport) -> Value {
    let conflicts: Vec<Value> = {
        let mut v = Vec::new();
        for (i, a) in report.transactions.iter().enumerate() {
            for (j, b) in report.transactions.iter().enumerate() {
                if j <= i {
                    continue;
                }
                if let Some(c) = &report.conflicts[i][j] {
                    v.push(json!({
                        "a": a,
                        "b": b,
                        "resource": c.resource,
                        "modes": [c.mode_a, c.mode_b],
                    }));
                }
            }
        }
        v
    };
    let matrix: Vec<Vec<bool>> = report
        .conflicts
        .iter()
        .map(|row| row.iter().map(|c| c.is_some()).collect())
        .collect();
    json!({
        "transactions": report.transactions,
        "conflicts": conflicts,
        "conflict_matrix": matrix,
        "maximal_sets": report.maximal_sets,
        "trace": report.trace.iter().map(trace_step_json).collect::<Vec<_>>(),
        "events": report.events.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
    })
}

/// JSON-lines event log, one event per line.
pub fn events_jsonl(report: &ConcurrencyReport) -> String {
    report
        .events
        .iter()
        .map(|e| e.to_json().to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
