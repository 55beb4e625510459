use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rtlsmith_core::tcrg::{Edge, Node, NodeKind, Relation};
use rtlsmith_core::{build_dag, khop, parse_plan, DagError, Tcrg};

/// Random typed graph with up to 50 nodes.
fn random_tcrg() -> impl Strategy<Value = Tcrg> {
    (1usize..8, 0usize..20, 0usize..12, 0usize..11)
        .prop_flat_map(|(t, s, tr, ex)| {
            let pairs = proptest::collection::vec(
                (any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0u8..3),
                0..120,
            );
            (Just((t, s, tr, ex)), pairs)
        })
        .prop_map(|((t, s, tr, ex), pairs)| {
            let mut nodes = Vec::new();
            let mut ids: BTreeMap<NodeKind, Vec<String>> = BTreeMap::new();
            for (kind, n, prefix) in [
                (NodeKind::Task, t, "task"),
                (NodeKind::Signal, s, "signal"),
                (NodeKind::Transition, tr, "transition"),
                (NodeKind::Example, ex, "example"),
            ] {
                for i in 0..n {
                    let id = format!("{prefix}:{i}");
                    ids.entry(kind).or_default().push(id.clone());
                    nodes.push(Node {
                        id,
                        kind,
                        text: format!("{prefix} {i}"),
                    });
                }
            }
            let mut edges = BTreeSet::new();
            for (a, b, r) in pairs {
                let (rel, fk, tk) = match r {
                    0 => (Relation::Implements, NodeKind::Task, NodeKind::Signal),
                    1 => (Relation::SignalTransition, NodeKind::Signal, NodeKind::Transition),
                    _ => (Relation::Examples, NodeKind::Signal, NodeKind::Example),
                };
                let (Some(from), Some(to)) = (ids.get(&fk), ids.get(&tk)) else {
                    continue;
                };
                edges.insert(Edge {
                    from: a.get(from).clone(),
                    to: b.get(to).clone(),
                    rel,
                });
            }
            Tcrg::from_parts(nodes, edges.into_iter().collect()).unwrap()
        })
}

/// Distances by repeated relaxation over the edge list.
fn brute_force(g: &Tcrg, start: &str, k: usize) -> BTreeMap<String, usize> {
    let mut dist = BTreeMap::from([(start.to_string(), 0usize)]);
    loop {
        let mut changed = false;
        for e in g.edges() {
            if let Some(&d) = dist.get(&e.from) {
                if d < k && dist.get(&e.to).is_none_or(|&old| d + 1 < old) {
                    dist.insert(e.to.clone(), d + 1);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist.remove(start);
    dist
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn khop_equals_reference_bfs(g in random_tcrg(), k in 0usize..5) {
        for task in g.nodes().filter(|n| n.kind == NodeKind::Task) {
            let r = khop(&g, &task.id, k).unwrap();
            let got: BTreeMap<String, usize> = r.signals.iter().chain(&r.transitions).chain(&r.examples)
                .map(|x| (x.id.clone(), x.hop)).collect();
            prop_assert_eq!(&got, &brute_force(&g, &task.id, k));
            let next = khop(&g, &task.id, k + 1).unwrap();
            prop_assert!(r.node_ids().is_subset(&next.node_ids()));
            let n = g.nodes().count();
            prop_assert_eq!(khop(&g, &task.id, n).unwrap().node_ids(), brute_force(&g, &task.id, usize::MAX).into_keys().collect::<BTreeSet<_>>());
        }
    }
}

/// Random DAG over n tasks: edges only from lower to higher index, then the
/// plan order is shuffled so the input order is not already topological.
fn random_plan() -> impl Strategy<Value = (String, usize)> {
    (2usize..14).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), n),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
        )
            .prop_map(|(n, adj, order)| {
                let tasks: Vec<String> = order
                    .iter()
                    .map(|&i| {
                        let deps: Vec<String> = (0..i).filter(|&j| adj[i][j]).map(|j| format!("\"n{j}\"")).collect();
                        format!(
                            r#"{{"id": "n{i}", "type": "write", "description": "task {i}", "depends_on": [{}]}}"#,
                            deps.join(", ")
                        )
                    })
                    .collect();
                (format!("[{}]", tasks.join(",")), n)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn scheduling_yields_a_topological_order((text, _n) in random_plan(), picks in proptest::collection::vec(any::<prop::sample::Index>(), 20)) {
        let plan = parse_plan(&text).unwrap();
        let mut dag = build_dag(&plan).unwrap();
        let mut order = Vec::new();
        let mut pick = picks.iter().cycle();
        loop {
            let ready = dag.next_ready();
            if ready.is_empty() {
                break;
            }
            let id = pick.next().unwrap().get(&ready).clone();
            dag.start(&id).unwrap();
            dag.complete(&id).unwrap();
            order.push(id);
        }
        prop_assert!(dag.is_complete());
        prop_assert_eq!(order.len(), plan.subtasks.len());
        let pos: BTreeMap<&String, usize> = order.iter().enumerate().map(|(i, id)| (id, i)).collect();
        for t in &plan.subtasks {
            for d in &t.depends_on {
                prop_assert!(pos[d] < pos[&t.id], "{} ran before its parent {}", t.id, d);
            }
        }
    }

    #[test]
    fn cycles_are_always_rejected((text, n) in random_plan(), a in 0usize..14, b in 0usize..14) {
        // close a cycle by making the lower-index task depend on a path end
        let (lo, hi) = (a.min(b) % n, a.max(b) % n);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for t in v.as_array_mut().unwrap() {
            let id = t["id"].as_str().unwrap().to_string();
            if id == format!("n{hi}") && lo != hi {
                t["depends_on"].as_array_mut().unwrap().push(format!("n{lo}").into());
            }
            if id == format!("n{lo}") {
                let target = if lo == hi { format!("n{lo}") } else { format!("n{hi}") };
                t["depends_on"].as_array_mut().unwrap().push(target.into());
            }
        }
        match parse_plan(&v.to_string()) {
            Err(_) => prop_assert_eq!(lo, hi),
            Ok(plan) => prop_assert!(matches!(build_dag(&plan), Err(DagError::Cycle(_)))),
        }
    }
}
