//! Finite directed multigraphs, strongly connected components and the
//! component graphs `B(E, C0)` / `B~(E, C0)`.
//!
//! A graph is stored as a square integer adjacency matrix indexed by the
//! lexicographically sorted vertex identifiers; entry `(s, r)` counts the
//! edges from `s` to `r`. A vertex is a path of length zero, so every vertex
//! reaches itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::error::{KmsError, Result};

pub type VertexSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: DMatrix<u64>,
}

impl Graph {
    /// Builds a graph from `(source, target, multiplicity)` triples. Repeated
    /// pairs accumulate. `extra_vertices` lists isolated vertices that carry
    /// no edge.
    pub fn from_edges<I, S>(edges: I, extra_vertices: &[&str]) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, u64)>,
        S: AsRef<str>,
    {
        let edges: Vec<(String, String, u64)> = edges
            .into_iter()
            .map(|(s, t, m)| (s.as_ref().to_owned(), t.as_ref().to_owned(), m))
            .collect();
        let mut names: BTreeSet<String> = extra_vertices.iter().map(|s| s.to_string()).collect();
        for (s, t, _) in &edges {
            names.insert(s.clone());
            names.insert(t.clone());
        }
        let names: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let n = names.len();
        let mut adjacency = DMatrix::<u64>::zeros(n, n);
        for (s, t, m) in edges {
            adjacency[(index[&s], index[&t])] += m;
        }
        Ok(Graph {
            names,
            index,
            adjacency,
        })
    }

    /// Builds a graph from vertex names and a matching adjacency matrix. Rows
    /// and columns are reordered so that indices follow sorted names.
    pub fn from_adjacency<S: AsRef<str>>(names: &[S], adjacency: DMatrix<u64>) -> Result<Self> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(KmsError::NotSquare {
                rows: adjacency.nrows(),
                cols: adjacency.ncols(),
            });
        }
        if adjacency.nrows() != names.len() {
            return Err(KmsError::InvalidParameter(format!(
                "{} names for a {}x{} matrix",
                names.len(),
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| names[a].as_ref().cmp(names[b].as_ref()));
        for pair in order.windows(2) {
            if names[pair[0]].as_ref() == names[pair[1]].as_ref() {
                return Err(KmsError::DuplicateVertex(names[pair[0]].as_ref().to_owned()));
            }
        }
        let n = names.len();
        let sorted_names: Vec<String> = order.iter().map(|&i| names[i].as_ref().to_owned()).collect();
        let permuted = DMatrix::from_fn(n, n, |i, j| adjacency[(order[i], order[j])]);
        let index = sorted_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(Graph {
            names: sorted_names,
            index,
            adjacency: permuted,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total number of edges, counted with multiplicity.
    pub fn edge_count(&self) -> u64 {
        self.adjacency.iter().sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| KmsError::UnknownVertex(name.to_owned()))
    }

    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<VertexSet> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }

    pub fn adjacency(&self) -> &DMatrix<u64> {
        &self.adjacency
    }

    /// `|s E^1 r|`
    pub fn multiplicity(&self, source: usize, target: usize) -> u64 {
        self.adjacency[(source, target)]
    }

    pub fn adjacency_f64(&self) -> DMatrix<f64> {
        self.adjacency.map(|m| m as f64)
    }

    /// The `rows x cols` block of the adjacency matrix, as floats.
    pub fn block_f64(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.adjacency[(rows[i], cols[j])] as f64
        })
    }

    fn check_indices<'a>(&self, set: impl IntoIterator<Item = &'a usize>) -> Result<()> {
        let len = self.vertex_count();
        for &index in set {
            if index >= len {
                return Err(KmsError::IndexOutOfRange { index, len });
            }
        }
        Ok(())
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count()).filter(move |&t| self.adjacency[(v, t)] > 0)
    }

    pub fn predecessors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count()).filter(move |&s| self.adjacency[(s, v)] > 0)
    }

    /// The restriction `E_S`: vertices `S` and every edge with both ends in `S`.
    pub fn restriction(&self, subset: &VertexSet) -> Result<Graph> {
        self.check_indices(subset)?;
        let keep: Vec<usize> = subset.iter().copied().collect();
        let names: Vec<String> = keep.iter().map(|&i| self.names[i].clone()).collect();
        let n = keep.len();
        let adjacency = DMatrix::from_fn(n, n, |i, j| self.adjacency[(keep[i], keep[j])]);
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Graph {
            names,
            index,
            adjacency,
        })
    }

    pub fn restriction_by_names<S: AsRef<str>>(&self, subset: &[S]) -> Result<Graph> {
        self.restriction(&self.indices_of(subset)?)
    }

    /// `S_D = s(E^* D)`: every vertex with a path (possibly of length zero) into `targets`.
    pub fn ancestors(&self, targets: &VertexSet) -> Result<VertexSet> {
        self.check_indices(targets)?;
        Ok(self.flood(targets, |v| self.predecessors(v).collect()))
    }

    /// Every vertex reachable from `sources`, including the sources.
    pub fn descendants(&self, sources: &VertexSet) -> Result<VertexSet> {
        self.check_indices(sources)?;
        Ok(self.flood(sources, |v| self.successors(v).collect()))
    }

    fn flood(&self, start: &VertexSet, next: impl Fn(usize) -> Vec<usize>) -> VertexSet {
        let mut seen = start.clone();
        let mut stack: Vec<usize> = start.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for u in next(v) {
                if seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        seen
    }

    pub fn scc(&self) -> Result<SccDecomposition> {
        if self.is_empty() {
            return Err(KmsError::EmptyGraph);
        }
        let components = strongly_connected(self.vertex_count(), |v| {
            (0..self.vertex_count())
                .filter(|&t| self.adjacency[(v, t)] > 0)
                .collect()
        });
        Ok(SccDecomposition::from_components(self.vertex_count(), components))
    }

    /// Edge-list text: one `source target multiplicity` line per nonzero
    /// adjacency entry. Vertices without any edge are not representable.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let n = self.vertex_count();
        for s in 0..n {
            for t in 0..n {
                let m = self.adjacency[(s, t)];
                if m > 0 {
                    out.push_str(&format!("{} {} {}\n", self.names[s], self.names[t], m));
                }
            }
        }
        out
    }
}

/// Tarjan's algorithm on an implicit successor function. Returns components
/// with sorted members, in no particular order.
pub(crate) fn strongly_connected(
    n: usize,
    successors: impl Fn(usize) -> Vec<usize>,
) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let succ: Vec<Vec<usize>> = (0..n).map(&successors).collect();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0usize;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (vertex, next successor position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// The partition `pi(E)` of the vertices into strongly connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDecomposition {
    /// Sorted member lists, ordered by their smallest vertex index.
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
}

impl SccDecomposition {
    pub(crate) fn from_components(n: usize, mut components: Vec<Vec<usize>>) -> Self {
        components.sort_by_key(|c| c[0]);
        let mut component_of = vec![0; n];
        for (ci, c) in components.iter().enumerate() {
            for &v in c {
                component_of[v] = ci;
            }
        }
        SccDecomposition {
            components,
            component_of,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn members(&self, component: usize) -> &[usize] {
        &self.components[component]
    }

    pub fn member_set(&self, component: usize) -> VertexSet {
        self.components[component].iter().copied().collect()
    }

    /// Index of the component whose member set is exactly `set`.
    pub fn find(&self, set: &VertexSet) -> Option<usize> {
        let first = *set.iter().next()?;
        let ci = *self.component_of.get(first)?;
        (self.components[ci].len() == set.len() && self.components[ci].iter().all(|v| set.contains(v)))
            .then_some(ci)
    }

    /// `true` when some edge of `g` leads from component `a` to component `b != a`.
    pub fn has_edge(&self, g: &Graph, a: usize, b: usize) -> bool {
        self.components[a]
            .iter()
            .any(|&s| self.components[b].iter().any(|&t| g.multiplicity(s, t) > 0))
    }

    /// Components reachable from `component` (including itself) in the component DAG.
    pub fn reachable_components(&self, g: &Graph, component: usize) -> BTreeSet<usize> {
        let start: VertexSet = self.member_set(component);
        let desc = g.descendants(&start).expect("component indices are valid");
        desc.iter().map(|&v| self.component_of[v]).collect()
    }

    /// Components with a path into `component` (including itself).
    pub fn ancestor_components(&self, g: &Graph, component: usize) -> BTreeSet<usize> {
        let start: VertexSet = self.member_set(component);
        let anc = g.ancestors(&start).expect("component indices are valid");
        anc.iter().map(|&v| self.component_of[v]).collect()
    }

    /// Component indices in an order where every edge goes from an earlier
    /// component to a later one (sources first). Ties broken by index.
    pub fn topological_order(&self, g: &Graph) -> Vec<usize> {
        let k = self.len();
        let mut indegree = vec![0usize; k];
        let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        for s in 0..g.vertex_count() {
            for t in g.successors(s) {
                let (a, b) = (self.component_of[s], self.component_of[t]);
                if a != b && out[a].insert(b) {
                    indegree[b] += 1;
                }
            }
        }
        let mut ready: BTreeSet<usize> = (0..k).filter(|&c| indegree[c] == 0).collect();
        let mut order = Vec::with_capacity(k);
        while let Some(c) = ready.pop_first() {
            order.push(c);
            for &b in &out[c] {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.insert(b);
                }
            }
        }
        order
    }
}

pub type LiftedEdges = BTreeMap<(usize, usize), Vec<(usize, usize, u64)>>;

/// `B(E, C0)` together with the edge multiplicities of `B~(E, C0)`.
///
/// Vertices are component indices of the originating [`SccDecomposition`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondensationGraph {
    pub base: usize,
    /// Components `C` with `C E^* C0` nonempty, sorted.
    pub vertices: Vec<usize>,
    /// `(C', C) -> number of E-edges from C' to C`; an entry exists iff the
    /// simple edge `C' -> C` is present in `B`.
    pub edge_multiplicity: BTreeMap<(usize, usize), u64>,
    /// The individual edges of `B~` grouped by their image in `B`, as
    /// `(source vertex, target vertex, parallel count)`.
    pub lifted_edges: LiftedEdges,
}

impl CondensationGraph {
    pub fn new(g: &Graph, scc: &SccDecomposition, base: usize) -> Result<Self> {
        if base >= scc.len() {
            return Err(KmsError::NotAComponent);
        }
        let vertices: Vec<usize> = scc.ancestor_components(g, base).into_iter().collect();
        let inside: BTreeSet<usize> = vertices.iter().copied().collect();
        let mut edge_multiplicity = BTreeMap::new();
        let mut lifted_edges = LiftedEdges::new();
        for &c in &vertices {
            for &s in scc.members(c) {
                for t in g.successors(s) {
                    let d = scc.component_of[t];
                    if d == c || !inside.contains(&d) {
                        continue;
                    }
                    let m = g.multiplicity(s, t);
                    *edge_multiplicity.entry((c, d)).or_insert(0) += m;
                    lifted_edges.entry((c, d)).or_default().push((s, t, m));
                }
            }
        }
        Ok(CondensationGraph {
            base,
            vertices,
            edge_multiplicity,
            lifted_edges,
        })
    }

    pub fn contains(&self, component: usize) -> bool {
        self.vertices.binary_search(&component).is_ok()
    }

    pub fn successors(&self, component: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_multiplicity
            .range((component, 0)..=(component, usize::MAX))
            .map(|(&(_, d), _)| d)
    }

    pub fn edge_count(&self) -> usize {
        self.edge_multiplicity.len()
    }

    /// Kahn's algorithm; `Err(Cyclic)` if some vertex is never released.
    /// The returned order lists sources first and the base last.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree: BTreeMap<usize, usize> = self.vertices.iter().map(|&c| (c, 0)).collect();
        for &(_, d) in self.edge_multiplicity.keys() {
            *indegree.get_mut(&d).ok_or(KmsError::Cyclic)? += 1;
        }
        let mut ready: BTreeSet<usize> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&c, _)| c).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(c) = ready.pop_first() {
            order.push(c);
            for d in self.successors(c).collect::<Vec<_>>() {
                let e = indegree.get_mut(&d).expect("successor is a vertex");
                *e -= 1;
                if *e == 0 {
                    ready.insert(d);
                }
            }
        }
        if order.len() != self.vertices.len() {
            return Err(KmsError::Cyclic);
        }
        Ok(order)
    }

    /// Vertices of `B` without outgoing edges.
    pub fn sinks(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .copied()
            .filter(|&c| self.successors(c).next().is_none())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Graph {
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
        .unwrap()
    }

    fn names(g: &Graph, set: &VertexSet) -> Vec<String> {
        set.iter().map(|&i| g.name(i).to_owned()).collect()
    }

    #[test]
    fn vertices_are_sorted() {
        let g = diamond();
        assert_eq!(g.names(), &["u1", "u2", "v", "w1", "w2"]);
        assert_eq!(g.edge_count(), 15);
    }

    #[test]
    fn scc_of_diamond() {
        let g = diamond();
        let scc = g.scc().unwrap();
        let comps: Vec<Vec<&str>> = scc
            .components
            .iter()
            .map(|c| c.iter().map(|&i| g.name(i)).collect())
            .collect();
        assert_eq!(comps, vec![vec!["u1", "u2"], vec!["v"], vec!["w1"], vec!["w2"]]);
    }

    #[test]
    fn scc_singleton_and_empty() {
        let g = Graph::from_edges(Vec::<(&str, &str, u64)>::new(), &["x"]).unwrap();
        assert_eq!(g.scc().unwrap().components, vec![vec![0]]);
        let empty = Graph::from_edges(Vec::<(&str, &str, u64)>::new(), &[]).unwrap();
        assert_eq!(empty.scc().unwrap_err(), KmsError::EmptyGraph);
    }

    #[test]
    fn restriction_blocks() {
        let g = diamond();
        let r = g.restriction_by_names(&["u1", "u2"]).unwrap();
        assert_eq!(r.adjacency(), &DMatrix::from_row_slice(2, 2, &[0, 2, 1, 0]));
        let all: VertexSet = (0..g.vertex_count()).collect();
        assert_eq!(g.restriction(&all).unwrap(), g);
        let empty = g.restriction(&VertexSet::new()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.scc().unwrap_err(), KmsError::EmptyGraph);
        assert!(matches!(
            g.restriction_by_names(&["nope"]),
            Err(KmsError::UnknownVertex(_))
        ));
    }

    #[test]
    fn ancestors_of_diamond() {
        let g = diamond();
        let w1 = g.indices_of(&["w1"]).unwrap();
        assert_eq!(names(&g, &g.ancestors(&w1).unwrap()), vec!["u1", "u2", "w1"]);
        let v = g.indices_of(&["v"]).unwrap();
        assert_eq!(g.ancestors(&v).unwrap().len(), 5);
        let all: VertexSet = (0..5).collect();
        assert_eq!(g.ancestors(&all).unwrap(), all);
        let bad: VertexSet = [9].into_iter().collect();
        assert!(g.ancestors(&bad).is_err());
    }

    #[test]
    fn condensation_of_diamond() {
        let g = diamond();
        let scc = g.scc().unwrap();
        let base = scc.component_of[g.index_of("v").unwrap()];
        let b = CondensationGraph::new(&g, &scc, base).unwrap();
        assert_eq!(b.vertices.len(), 4);
        // components: 0 = {u1,u2}, 1 = {v}, 2 = {w1}, 3 = {w2}
        let expected: BTreeMap<(usize, usize), u64> =
            [((0, 2), 1), ((0, 3), 1), ((2, 1), 1), ((3, 1), 1)].into_iter().collect();
        assert_eq!(b.edge_multiplicity, expected);
        assert_eq!(b.sinks(), vec![base]);
        let order = b.topological_order().unwrap();
        assert_eq!(order.first(), Some(&0));
        assert_eq!(order.last(), Some(&base));
    }

    #[test]
    fn condensation_of_strongly_connected_graph() {
        let g = Graph::from_edges([("a", "b", 1), ("b", "a", 3)], &[]).unwrap();
        let scc = g.scc().unwrap();
        let b = CondensationGraph::new(&g, &scc, 0).unwrap();
        assert_eq!(b.vertices, vec![0]);
        assert_eq!(b.edge_count(), 0);
        assert!(CondensationGraph::new(&g, &scc, 1).is_err());
    }

    #[test]
    fn from_adjacency_sorts_and_rejects_duplicates() {
        let m = DMatrix::from_row_slice(2, 2, &[0, 1, 2, 0]);
        let g = Graph::from_adjacency(&["b", "a"], m.clone()).unwrap();
        assert_eq!(g.names(), &["a", "b"]);
        assert_eq!(g.multiplicity(0, 1), 2);
        assert_eq!(g.multiplicity(1, 0), 1);
        assert!(matches!(
            Graph::from_adjacency(&["a", "a"], m),
            Err(KmsError::DuplicateVertex(_))
        ));
    }
}
