//! Brute-force cross-checks: truncated path-counting series with a rigorous
//! tail bound, and exhaustive path enumeration on tiny graphs.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KmsError, Result};
use crate::graph::{CondensationGraph, Graph, VertexSet};
use crate::kms::KmsStructure;
use crate::spectral::{self, ShiftedSystem};

pub const MAX_ENUMERATION_VERTICES: usize = 12;
pub const MAX_ENUMERATION_LENGTH: usize = 20;
/// Depth-first steps allowed before the enumeration gives up.
pub const ENUMERATION_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub value: f64,
    pub n: usize,
    /// Upper bound on the omitted tail; `+inf` when the series diverges.
    pub tail_bound: f64,
}

impl TruncationResult {
    /// Whether `exact` lies in `[value, value + tail_bound]` up to a relative
    /// rounding allowance.
    pub fn brackets(&self, exact: f64, rounding: f64) -> bool {
        let slack = rounding * exact.abs().max(self.value.abs()).max(f64::MIN_POSITIVE);
        exact >= self.value - slack && exact <= self.value + self.tail_bound + slack
    }
}

/// `sum_{n <= N} (A^n)_{w,v} e^{-beta n}` by iterated row-vector products on
/// `R = desc(w) ∩ anc(v)`.
///
/// The tail bound uses the positive vector `u = (I - y A_R)^{-1} 1` with
/// `e^{-beta} < y < 1 / rho(A_R)`, which satisfies `A_R u <= u / y`, so that
/// `sum_{n > N} x^n (A^n)_{w,v} <= x^{N+1} (r_{N+1} . u) / (u_v (1 - x / y))`.
pub fn truncated_z(g: &Graph, w: usize, v: usize, beta: f64, n: usize) -> Result<TruncationResult> {
    let len = g.vertex_count();
    for index in [w, v] {
        if index >= len {
            return Err(KmsError::IndexOutOfRange { index, len });
        }
    }
    let region: VertexSet = g
        .ancestors(&[v].into_iter().collect())?
        .intersection(&g.descendants(&[w].into_iter().collect())?)
        .copied()
        .collect();
    if region.is_empty() {
        return Ok(TruncationResult {
            value: 0.0,
            n,
            tail_bound: 0.0,
        });
    }
    let order: Vec<usize> = region.iter().copied().collect();
    let a = g.block_f64(&order, &order);
    let source = order.binary_search(&w).expect("w in region");
    let target = order.binary_search(&v).expect("v in region");
    let x = (-beta).exp();

    // s_k = x^k e_w^T A^k
    let mut s = DVector::<f64>::zeros(order.len());
    s[source] = 1.0;
    let mut value = s[target];
    for _ in 0..n {
        s = (a.tr_mul(&s)) * x;
        value += s[target];
    }
    let next = (a.tr_mul(&s)) * x;

    let rho = spectral::spectral_radius(&a)?;
    let tail_bound = if rho > 0.0 && x * rho >= 1.0 {
        f64::INFINITY
    } else if next.iter().all(|&t| t == 0.0) {
        0.0
    } else {
        let y = if rho > 0.0 { 0.5 * (x + 1.0 / rho) } else { 2.0 * x };
        let ones = DVector::from_element(order.len(), 1.0);
        let u = ShiftedSystem::new(&a, y)?.solve(&ones)?;
        let q = x / y;
        next.dot(&u) / (u[target] * (1.0 - q))
    };
    Ok(TruncationResult { value, n, tail_bound })
}

/// Exact `(A^n)_{w,v}` for `n = 0..=max_len` in 128-bit arithmetic.
pub fn exact_path_counts(adjacency: &DMatrix<u64>, w: usize, v: usize, max_len: usize) -> Result<Vec<u128>> {
    let size = adjacency.nrows();
    let mut row = vec![0u128; size];
    row[w] = 1;
    let mut counts = vec![row[v]];
    for _ in 0..max_len {
        let mut next = vec![0u128; size];
        for (s, &r) in row.iter().enumerate() {
            if r == 0 {
                continue;
            }
            for (t, slot) in next.iter_mut().enumerate() {
                let m = adjacency[(s, t)] as u128;
                if m != 0 {
                    *slot = r
                        .checked_mul(m)
                        .and_then(|p| slot.checked_add(p))
                        .ok_or_else(overflow)?;
                }
            }
        }
        row = next;
        counts.push(row[v]);
    }
    Ok(counts)
}

/// A path in `B~(E, C0)`: the inter-component edges it traverses, each as
/// `(source vertex, target vertex)`; parallel edges are merged and counted
/// through the multiplicity.
pub type LiftedSequence = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnumeration {
    pub w: usize,
    pub v: usize,
    pub max_len: usize,
    /// Number of paths of each length `0..=max_len`.
    pub histogram: Vec<u128>,
    /// `(A^n)_{w,v}` from integer matrix powers.
    pub exact: Vec<u128>,
    /// Histograms of the paths grouped by their lifted component sequence.
    pub groups: BTreeMap<LiftedSequence, Vec<u128>>,
    /// Groups whose histogram matches the convolution of component-wise counts.
    pub factorized_groups: usize,
    pub steps: u64,
}

impl PathEnumeration {
    pub fn histogram_matches(&self) -> bool {
        self.histogram == self.exact
    }

    /// The groups partition the paths: their histograms add up to the total.
    pub fn groups_reassemble(&self) -> bool {
        let mut sum = vec![0u128; self.max_len + 1];
        for h in self.groups.values() {
            for (s, c) in sum.iter_mut().zip(h) {
                *s += c;
            }
        }
        sum == self.histogram
    }

    pub fn all_groups_factorize(&self) -> bool {
        self.factorized_groups == self.groups.len()
    }

    pub fn passed(&self) -> bool {
        self.histogram_matches() && self.groups_reassemble() && self.all_groups_factorize()
    }
}

/// Enumerates every path from `w` to `v` of length at most `max_len`, edge
/// multiplicities counted as weights, and checks the counts against matrix
/// powers and against the component factorization of each lifted sequence.
pub fn enumerate_paths(structure: &KmsStructure, w: usize, v: usize, max_len: usize) -> Result<PathEnumeration> {
    let g = structure.graph();
    let size = g.vertex_count();
    if size > MAX_ENUMERATION_VERTICES {
        return Err(KmsError::EnumerationGuard(format!(
            "{size} vertices exceed the limit of {MAX_ENUMERATION_VERTICES}"
        )));
    }
    if max_len > MAX_ENUMERATION_LENGTH {
        return Err(KmsError::EnumerationGuard(format!(
            "length {max_len} exceeds the limit of {MAX_ENUMERATION_LENGTH}"
        )));
    }
    for index in [w, v] {
        if index >= size {
            return Err(KmsError::IndexOutOfRange { index, len: size });
        }
    }
    let reaches_v = g.ancestors(&[v].into_iter().collect())?;
    let comp = &structure.scc().component_of;

    struct Walk<'a> {
        g: &'a Graph,
        comp: &'a [usize],
        reaches_v: &'a VertexSet,
        v: usize,
        max_len: usize,
        histogram: Vec<u128>,
        groups: BTreeMap<LiftedSequence, Vec<u128>>,
        lifted: LiftedSequence,
        steps: u64,
    }

    impl Walk<'_> {
        fn visit(&mut self, at: usize, len: usize, weight: u128) -> Result<()> {
            self.steps += 1;
            if self.steps > ENUMERATION_BUDGET {
                return Err(KmsError::EnumerationGuard(format!(
                    "more than {ENUMERATION_BUDGET} enumeration steps"
                )));
            }
            if at == self.v {
                self.histogram[len] = add(self.histogram[len], weight)?;
                let max_len = self.max_len;
                let slot = &mut self
                    .groups
                    .entry(self.lifted.clone())
                    .or_insert_with(|| vec![0; max_len + 1])[len];
                *slot = add(*slot, weight)?;
            }
            if len == self.max_len {
                return Ok(());
            }
            let next: Vec<usize> = self.g.successors(at).filter(|t| self.reaches_v.contains(t)).collect();
            for t in next {
                let m = self.g.multiplicity(at, t) as u128;
                let crossing = self.comp[at] != self.comp[t];
                if crossing {
                    self.lifted.push((at, t));
                }
                self.visit(t, len + 1, mul(weight, m)?)?;
                if crossing {
                    self.lifted.pop();
                }
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        g,
        comp,
        reaches_v: &reaches_v,
        v,
        max_len,
        histogram: vec![0; max_len + 1],
        groups: BTreeMap::new(),
        lifted: Vec::new(),
        steps: 0,
    };
    if reaches_v.contains(&w) {
        walk.visit(w, 0, 1)?;
    }
    let exact = exact_path_counts(g.adjacency(), w, v, max_len)?;

    let mut factorized_groups = 0;
    for (seq, hist) in &walk.groups {
        if group_convolution(structure, w, v, seq, max_len)? == *hist {
            factorized_groups += 1;
        }
    }
    Ok(PathEnumeration {
        w,
        v,
        max_len,
        histogram: walk.histogram,
        exact,
        groups: walk.groups,
        factorized_groups,
        steps: walk.steps,
    })
}

/// Path counts inside the component of `from`, from `from` to `to`.
fn component_counts(structure: &KmsStructure, from: usize, to: usize, max_len: usize) -> Result<Vec<u128>> {
    let c = structure.component_of(from);
    if structure.component_of(to) != c {
        return Err(KmsError::Invariant("lifted edge leaves a component mid-sequence".into()));
    }
    let members = structure.scc().members(c);
    let sub = structure.graph().restriction(&structure.scc().member_set(c))?;
    let i = members.binary_search(&from).expect("member");
    let j = members.binary_search(&to).expect("member");
    exact_path_counts(sub.adjacency(), i, j, max_len)
}

/// Predicted length histogram of the paths with lifted sequence `seq`:
/// the convolution of the component path counts between the edges, shifted
/// by one per crossing edge and scaled by the edge multiplicities.
fn group_convolution(
    structure: &KmsStructure,
    w: usize,
    v: usize,
    seq: &[(usize, usize)],
    max_len: usize,
) -> Result<Vec<u128>> {
    let g = structure.graph();
    let mut acc = vec![0u128; max_len + 1];
    acc[0] = 1;
    let mut at = w;
    let mut legs: Vec<(usize, usize, u128)> = seq
        .iter()
        .map(|&(s, t)| (s, t, g.multiplicity(s, t) as u128))
        .collect();
    legs.push((v, usize::MAX, 1));
    for (s, t, m) in legs {
        let inner = component_counts(structure, at, s, max_len)?;
        let shift = usize::from(t != usize::MAX);
        let mut next = vec![0u128; max_len + 1];
        for (a, &ca) in acc.iter().enumerate() {
            if ca == 0 {
                continue;
            }
            for (b, &cb) in inner.iter().enumerate() {
                let len = a + b + shift;
                if len > max_len {
                    break;
                }
                next[len] = add(next[len], mul(mul(ca, cb)?, m)?)?;
            }
        }
        acc = next;
        if t != usize::MAX {
            at = t;
        }
    }
    Ok(acc)
}

fn overflow() -> KmsError {
    KmsError::EnumerationGuard("path count overflows".into())
}

fn add(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b).ok_or_else(overflow)
}

fn mul(a: u128, b: u128) -> Result<u128> {
    a.checked_mul(b).ok_or_else(overflow)
}

/// All lifted sequences from the component of `w` to the component of `v`
/// in `B~(E, C_v)`, with the product of their edge multiplicities.
pub fn lifted_paths(structure: &KmsStructure, w: usize, v: usize) -> Result<Vec<(LiftedSequence, u64)>> {
    let base = structure.component_of(v);
    let b = CondensationGraph::new(structure.graph(), structure.scc(), base)?;
    let start = structure.component_of(w);
    let mut out = Vec::new();
    if !b.contains(start) {
        return Ok(out);
    }
    fn walk(
        b: &CondensationGraph,
        at: usize,
        prefix: &mut LiftedSequence,
        weight: u64,
        out: &mut Vec<(LiftedSequence, u64)>,
    ) -> Result<()> {
        if at == b.base {
            out.push((prefix.clone(), weight));
            return Ok(());
        }
        for next in b.successors(at).collect::<Vec<_>>() {
            for &(s, t, m) in &b.lifted_edges[&(at, next)] {
                prefix.push((s, t));
                let weight = weight.checked_mul(m).ok_or_else(overflow)?;
                walk(b, next, prefix, weight, out)?;
                prefix.pop();
            }
        }
        Ok(())
    }
    walk(&b, start, &mut Vec::new(), 1, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    pub w: usize,
    pub v: usize,
    pub beta: f64,
    pub lifted_paths: usize,
    pub factorized: f64,
    pub direct: f64,
    pub relative_error: f64,
}

/// Sums `m(mu) Z_{w,s(e1)} e^{-beta} Z_{r(e1),s(e2)} ... Z_{r(ek),v}` over the
/// lifted sequences `mu`, each factor evaluated on its component restriction,
/// and compares the sum with `Z_{w,v}` on the whole graph.
pub fn factorization_check(structure: &KmsStructure, w: usize, v: usize, beta: f64) -> Result<FactorizationCheck> {
    let g = structure.graph();
    let mut restricted: BTreeMap<usize, KmsStructure> = BTreeMap::new();
    let mut factor = |from: usize, to: usize| -> Result<f64> {
        let c = structure.component_of(from);
        let members = structure.scc().members(c);
        if let std::collections::btree_map::Entry::Vacant(slot) = restricted.entry(c) {
            let sub = g.restriction(&structure.scc().member_set(c))?;
            slot.insert(KmsStructure::with_tolerances(sub, structure.tolerances())?);
        }
        let i = members.binary_search(&from).expect("member");
        let j = members.binary_search(&to).expect("member");
        restricted[&c].partition(i, j, beta)
    };
    let paths = lifted_paths(structure, w, v)?;
    let x = (-beta).exp();
    let mut factorized = 0.0;
    for (seq, weight) in &paths {
        let mut at = w;
        let mut term = *weight as f64;
        for &(s, t) in seq {
            term *= factor(at, s)? * x;
            at = t;
        }
        term *= factor(at, v)?;
        factorized += term;
    }
    let direct = structure.partition(w, v, beta)?;
    let relative_error = (factorized - direct).abs() / direct.abs().max(1.0);
    Ok(FactorizationCheck {
        w,
        v,
        beta,
        lifted_paths: paths.len(),
        factorized,
        direct,
        relative_error,
    })
}

/// Inverse temperature comfortably inside the convergence region of
/// `Z_{w,v}` for every pair of vertices.
pub fn sample_beta(structure: &KmsStructure, offset: f64) -> f64 {
    let rho = (0..structure.scc().len())
        .map(|c| structure.component_rho(c))
        .fold(0.0, f64::max);
    rho.max(1.0).ln() + offset
}

/// Ordered pairs `(w, v)` with a path from `w` to `v`.
pub fn connected_pairs(g: &Graph) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for v in 0..g.vertex_count() {
        let anc: BTreeSet<usize> = g.ancestors(&[v].into_iter().collect())?;
        pairs.extend(anc.into_iter().map(|w| (w, v)));
    }
    pairs.sort_unstable();
    Ok(pairs)
}
