mod common;

use kms_core::fixtures;
use kms_core::{CondensationGraph, Graph, VertexSet};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Reflexive-transitive closure by repeated boolean squaring.
fn reachability(g: &Graph) -> DMatrix<bool> {
    let n = g.vertex_count();
    let mut r = DMatrix::from_fn(n, n, |i, j| i == j || g.multiplicity(i, j) > 0);
    loop {
        let next = DMatrix::from_fn(n, n, |i, j| (0..n).any(|k| r[(i, k)] && r[(k, j)]));
        if next == r {
            return r;
        }
        r = next;
    }
}

fn graph_strategy(max: usize) -> impl Strategy<Value = Graph> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(0u64..3, n * n).prop_map(move |entries| {
            let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            Graph::from_adjacency(&names, DMatrix::from_row_slice(n, n, &entries)).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn scc_matches_mutual_reachability(g in graph_strategy(8)) {
        let scc = g.scc().unwrap();
        let r = reachability(&g);
        let n = g.vertex_count();
        for i in 0..n {
            for j in 0..n {
                let same = scc.component_of[i] == scc.component_of[j];
                prop_assert_eq!(same, r[(i, j)] && r[(j, i)]);
            }
        }
        let firsts: Vec<usize> = scc.components.iter().map(|c| c[0]).collect();
        let mut sorted = firsts.clone();
        sorted.sort_unstable();
        prop_assert_eq!(firsts, sorted);
    }

    #[test]
    fn ancestors_are_closed(g in graph_strategy(8), seed in 0usize..8) {
        let d: VertexSet = [seed % g.vertex_count()].into_iter().collect();
        let once = g.ancestors(&d).unwrap();
        prop_assert!(d.is_subset(&once));
        prop_assert_eq!(g.ancestors(&once).unwrap(), once.clone());
        let r = reachability(&g);
        for w in 0..g.vertex_count() {
            prop_assert_eq!(once.contains(&w), d.iter().any(|&t| r[(w, t)]));
        }
    }

    #[test]
    fn components_restrict_to_strongly_connected_graphs(g in graph_strategy(8)) {
        let scc = g.scc().unwrap();
        for c in 0..scc.len() {
            let sub = g.restriction(&scc.member_set(c)).unwrap();
            prop_assert_eq!(sub.scc().unwrap().len(), 1);
        }
    }

    #[test]
    fn condensation_invariants(g in graph_strategy(8), pick in 0usize..8) {
        let scc = g.scc().unwrap();
        let base = pick % scc.len();
        let b = CondensationGraph::new(&g, &scc, base).unwrap();
        prop_assert!(b.topological_order().is_ok());
        prop_assert_eq!(b.sinks(), vec![base]);
        for (&(c, d), &m) in &b.edge_multiplicity {
            let exact: u64 = scc
                .members(c)
                .iter()
                .flat_map(|&s| scc.members(d).iter().map(move |&t| (s, t)))
                .map(|(s, t)| g.multiplicity(s, t))
                .sum();
            prop_assert!(m >= 1);
            prop_assert_eq!(m, exact);
            let lifted: u64 = b.lifted_edges[&(c, d)].iter().map(|e| e.2).sum();
            prop_assert_eq!(lifted, m);
        }
        let order = b.topological_order().unwrap();
        prop_assert_eq!(*order.last().unwrap(), base);
    }
}

#[test]
fn ladder_condensation_is_four_chains() {
    let g = fixtures::ladder();
    let scc = g.scc().unwrap();
    let base = scc.find(&g.indices_of(&["v1", "v2"]).unwrap()).unwrap();
    let b = CondensationGraph::new(&g, &scc, base).unwrap();
    assert_eq!(b.vertices.len(), 9);
    assert_eq!(b.edge_count(), 8);
    for i in 1..=4 {
        let w = scc.component_of[g.index_of(&format!("w{i}")).unwrap()];
        let u = scc.component_of[g.index_of(&format!("u{i}")).unwrap()];
        assert_eq!(b.successors(w).collect::<Vec<_>>(), vec![u]);
        assert_eq!(b.successors(u).collect::<Vec<_>>(), vec![base]);
    }
}

#[test]
fn strongly_connected_condensation_is_a_point() {
    let g = Graph::from_edges([("a", "b", 1), ("b", "a", 1)], &[]).unwrap();
    let scc = g.scc().unwrap();
    let b = CondensationGraph::new(&g, &scc, 0).unwrap();
    assert_eq!(b.vertices, vec![0]);
    assert_eq!(b.edge_count(), 0);
}

#[test]
fn restriction_edge_cases() {
    let g = fixtures::diamond();
    let all: VertexSet = (0..g.vertex_count()).collect();
    assert_eq!(g.restriction(&all).unwrap(), g);
    assert!(g.restriction(&VertexSet::new()).unwrap().scc().is_err());
    assert!(g.restriction_by_names(&["nope"]).is_err());
}

#[test]
fn random_generators_are_deterministic() {
    let a = common::random_graph(&mut common::seeded(3), 10);
    let b = common::random_graph(&mut common::seeded(3), 10);
    assert_eq!(a, b);
}
