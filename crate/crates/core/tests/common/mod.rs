#![allow(dead_code)]

use std::path::PathBuf;

use kms_core::io::parse_graph;
use kms_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Every `*.txt` graph in the fixture directory, sorted by file name.
pub fn fixture_graphs() -> Vec<(String, Graph)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .expect("fixture directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, parse_graph(&text).unwrap())
        })
        .collect()
}

/// A random multigraph on at most `max_vertices` vertices: loops and
/// forward edges are common, backward edges rare, so that the component
/// structure is nontrivial and integer spectral radii often tie.
pub fn random_graph(rng: &mut ChaCha8Rng, max_vertices: usize) -> Graph {
    let n = rng.random_range(2..=max_vertices);
    let names: Vec<String> = (0..n).map(|i| format!("x{i:02}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        if rng.random_bool(0.6) {
            // two loops most often, so that radii tie along chains
            let loops = [1, 2, 2, 2, 3][rng.random_range(0..5)];
            edges.push((names[i].clone(), names[i].clone(), loops));
        }
        for j in 0..n {
            let p = if i < j { 0.3 } else { 0.06 };
            if i != j && rng.random_bool(p) {
                let m = [1, 1, 1, 2, 3][rng.random_range(0..5)];
                edges.push((names[i].clone(), names[j].clone(), m));
            }
        }
    }
    let all: Vec<&str> = names.iter().map(String::as_str).collect();
    Graph::from_edges(edges, &all).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random nonnegative irreducible matrix: a random cyclic permutation with
/// positive weights plus sparse random entries.
pub fn random_irreducible(rng: &mut ChaCha8Rng, max_dim: usize) -> nalgebra::DMatrix<f64> {
    let n = rng.random_range(1..=max_dim);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        a[(order[k], order[(k + 1) % n])] = rng.random_range(0.2..2.0);
    }
    for i in 0..n {
        for j in 0..n {
            if rng.random_bool(0.3) {
                a[(i, j)] += rng.random_range(0.0..1.5);
            }
        }
    }
    a
}

/// Sources with two or three loops, each heading a short chain of loop
/// vertices, all draining into a small sink cycle; sparse forward edges
/// between chains. Critical minimal components then compete along paths of
/// different critical length, as in the maximal-path theorem.
pub fn random_layered_graph(rng: &mut ChaCha8Rng) -> Graph {
    let sources = rng.random_range(2..=3);
    let mut edges: Vec<(String, String, u64)> = Vec::new();
    let mut chains: Vec<Vec<String>> = Vec::new();
    for i in 0..sources {
        let head = format!("s{i}");
        edges.push((head.clone(), head.clone(), [2, 2, 3][rng.random_range(0..3)]));
        let mut chain = vec![head];
        for j in 0..rng.random_range(0..=2) {
            let name = format!("c{i}{j}");
            let loops = [1, 2, 2][rng.random_range(0..3)];
            edges.push((name.clone(), name.clone(), loops));
            edges.push((chain.last().unwrap().clone(), name.clone(), rng.random_range(1..=3)));
            chain.push(name);
        }
        chains.push(chain);
    }
    let sink = ["t0".to_owned(), "t1".to_owned()];
    edges.push((sink[0].clone(), sink[1].clone(), 1));
    edges.push((sink[1].clone(), sink[0].clone(), rng.random_range(1..=2)));
    for chain in &chains {
        let target = sink[rng.random_range(0..2)].clone();
        edges.push((chain.last().unwrap().clone(), target, rng.random_range(1..=3)));
    }
    for a in 0..chains.len() {
        for b in 0..chains.len() {
            if a != b && rng.random_bool(0.2) {
                let from = chains[a][rng.random_range(0..chains[a].len())].clone();
                let to = chains[b][rng.random_range(1.min(chains[b].len() - 1)..chains[b].len())].clone();
                if from < to {
                    edges.push((from, to, 1));
                }
            }
        }
    }
    Graph::from_edges(edges, &[]).unwrap()
}
