//! Small reference graphs used across the test-suites and the documentation.

use crate::graph::Graph;

/// One vertex with `loops` loops.
pub fn loops(loops: u64) -> Graph {
    Graph::from_edges([("v", "v", loops)], &[]).expect("valid edge list")
}

/// One vertex with two loops.
pub fn two_loops() -> Graph {
    loops(2)
}

/// Four two-loop sources `w_i` feeding `u_i`, which feed the 2-cycle `{v1, v2}`.
/// `u1` and `u4` carry two loops, `u2` and `u3` one.
pub fn ladder() -> Graph {
    Graph::from_edges(
        [
            ("w1", "w1", 2),
            ("w2", "w2", 2),
            ("w3", "w3", 2),
            ("w4", "w4", 2),
            ("w1", "u1", 1),
            ("w2", "u2", 1),
            ("w3", "u3", 1),
            ("w4", "u4", 1),
            ("u1", "u1", 2),
            ("u2", "u2", 1),
            ("u3", "u3", 1),
            ("u4", "u4", 2),
            ("u1", "v1", 1),
            ("u2", "v1", 1),
            ("u3", "v2", 1),
            ("u4", "v2", 1),
            ("v1", "v2", 1),
            ("v2", "v1", 1),
        ],
        &[],
    )
    .expect("valid edge list")
}

/// The cycle `{u1, u2}` (two edges one way, one back) feeding two
/// three-loop vertices `w1`, `w2` that both feed the two-loop vertex `v`.
pub fn diamond() -> Graph {
    Graph::from_edges(
        [
            ("v", "v", 2),
            ("w1", "w1", 3),
            ("w2", "w2", 3),
            ("u1", "u2", 2),
            ("u2", "u1", 1),
            ("u1", "w1", 1),
            ("u2", "w2", 1),
            ("w1", "v", 1),
            ("w2", "v", 1),
        ],
        &[],
    )
    .expect("valid edge list")
}
