//! Differential check of the condensation-based transitive access
//! vectors against a naive breadth-first reachability oracle, over
//! generated schemas with recursion cycles and multiple inheritance.

use std::collections::{BTreeMap, VecDeque};

use avlock_core::commutativity::TableSet;
use avlock_core::generate::{generate_random_schema, GenParams};
use avlock_core::schema::{parse_schema, ClassModel};
use avlock_core::tav_graph::{build_lbr_graph, compute_tavs};
use avlock_core::vectors::{av_commutes, AccessVector};

/// Oracle: plain BFS over the late-binding resolution graph, joining
/// the direct access vectors of every reachable vertex. No strong
/// components, no memoization.
fn tavs_by_bfs(model: &ClassModel, class: &str) -> BTreeMap<String, AccessVector> {
    let graph = build_lbr_graph(model, class).unwrap();
    let mut out = BTreeMap::new();
    for method in model.methods(class).unwrap().names() {
        let start = graph
            .vertex_index(&avlock_core::extraction::MethodRef::new(
                class,
                method.clone(),
            ))
            .unwrap();
        let mut seen = vec![false; graph.vertex_count()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut acc = graph.facts(start).dav.clone();
        while let Some(v) = queue.pop_front() {
            acc = acc.join(&graph.facts(v).dav);
            for &w in graph.successors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        out.insert(method.clone(), acc);
    }
    out
}

fn check_schema(text: &str) {
    let model = parse_schema(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let tables = TableSet::build(&model).unwrap();
    for class in model.class_names() {
        let fast = compute_tavs(&model, class).unwrap();
        let slow = tavs_by_bfs(&model, class);
        assert_eq!(fast.len(), slow.len());
        for (method, tav) in &fast {
            assert_eq!(
                tav, &slow[method],
                "TAV mismatch for {class}.{method}\n{text}"
            );
            // Exact equality includes the rendered form.
            assert_eq!(tav.to_string(), slow[method].to_string());
        }
        let table = tables.table(class).unwrap();
        for a in table.methods() {
            for b in table.methods() {
                assert_eq!(
                    table.modes_commute(a, b).unwrap(),
                    av_commutes(&fast[a], &fast[b]),
                    "table/vector disagreement for {class}: ({a}, {b})\n{text}"
                );
            }
        }
    }
}

#[test]
fn condensation_tavs_equal_bfs_oracle_across_generated_schemas() {
    for seed in 0..120u64 {
        check_schema(&generate_random_schema(seed, &GenParams::default()));
    }
}

#[test]
fn oracle_agreement_holds_under_dense_recursion() {
    let params = GenParams {
        recursion: 0.8,
        self_calls: 1.5,
        prefix_calls: 0.7,
        override_prob: 0.6,
        ..GenParams::default()
    };
    for seed in 0..60u64 {
        check_schema(&generate_random_schema(seed, &params));
    }
}

#[test]
fn oracle_agreement_holds_under_wide_multiple_inheritance() {
    let params = GenParams {
        classes: 9,
        multi_inherit: 0.8,
        ..GenParams::default()
    };
    for seed in 0..60u64 {
        check_schema(&generate_random_schema(seed, &params));
    }
}

/// Coarsening each method to reader/writer can only forbid more than
/// the fine tables allow on the same fields.
#[test]
fn fine_tables_subsume_reader_writer_classification() {
    for seed in 0..60u64 {
        let text = generate_random_schema(seed, &GenParams::default());
        let model = parse_schema(&text).unwrap();
        for class in model.class_names() {
            let tavs = compute_tavs(&model, class).unwrap();
            let methods: Vec<&String> = tavs.keys().collect();
            for a in &methods {
                for b in &methods {
                    let rw_allows = tavs[*a].is_read_only() && tavs[*b].is_read_only();
                    if rw_allows {
                        // Two coarse readers: the fine relation must
                        // also allow them.
                        assert!(
                            av_commutes(&tavs[*a], &tavs[*b]),
                            "fine table forbids a reader pair: {class} ({a}, {b})"
                        );
                    }
                }
            }
        }
    }
}
