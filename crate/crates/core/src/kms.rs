//! Partition functions, critical inverse temperatures, minimal components,
//! harmonic vectors and the extremal KMS state vectors.
//!
//! A KMS state of the Toeplitz algebra is represented only through its
//! values on vertex projections `p_w` and on the gap projections `delta_w`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KmsError, Result};
use crate::genfun::{same_location, DEFAULT_POLE_TOLERANCE};
use crate::graph::{Graph, SccDecomposition, VertexSet};
use crate::spectral::{self, ShiftedSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance for equality of spectral radii / pole locations.
    pub critical: f64,
    /// Relative tolerance of the eigen-equation `A h = e^beta h`.
    pub harmonic: f64,
    /// Relative size below which an entry counts as vanishing.
    pub vanishing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            critical: DEFAULT_POLE_TOLERANCE,
            harmonic: 1e-9,
            vanishing: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicVector {
    pub beta: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub beta: f64,
    /// `phi(p_w)` for every vertex `w`.
    pub p: Vec<f64>,
    /// `phi(delta_w)`; for type-I states only the distinguished vertex is nonzero.
    pub delta: Vec<f64>,
    pub supported_at_infinity: bool,
}

impl StateVector {
    pub fn mass(&self) -> f64 {
        self.p.iter().sum()
    }

    /// `max_w |p_w - delta_w - e^{-beta} (A p)_w|`
    pub fn recursion_residual(&self, adjacency: &DMatrix<f64>) -> f64 {
        let p = DVector::from_column_slice(&self.p);
        let ap = adjacency * &p;
        let x = (-self.beta).exp();
        (0..self.p.len())
            .map(|w| (self.p[w] - self.delta[w] - x * ap[w]).abs())
            .fold(0.0, f64::max)
    }

    pub fn harmonic(&self) -> HarmonicVector {
        HarmonicVector {
            beta: self.beta,
            values: self.p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTemperature {
    pub component: usize,
    pub members: Vec<usize>,
    pub rho: f64,
    /// `log rho`
    pub beta: f64,
}

/// Outcome of [`KmsStructure::is_harmonic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCheck {
    pub harmonic: bool,
    /// `||A h - e^beta h||_inf / (e^beta ||h||_inf)`, zero for the zero vector.
    pub relative_residual: f64,
    pub zero_vector: bool,
    pub violation: Option<String>,
}

/// Precomputed component structure of a graph, on which every KMS
/// computation is performed.
#[derive(Debug, Clone)]
pub struct KmsStructure {
    graph: Graph,
    scc: SccDecomposition,
    adjacency: DMatrix<f64>,
    rho: Vec<f64>,
    tol: Tolerances,
}

impl KmsStructure {
    pub fn new(graph: Graph) -> Result<Self> {
        Self::with_tolerances(graph, Tolerances::default())
    }

    pub fn with_tolerances(graph: Graph, tol: Tolerances) -> Result<Self> {
        let scc = graph.scc()?;
        let adjacency = graph.adjacency_f64();
        let rho = scc
            .components
            .iter()
            .map(|c| spectral::spectral_radius(&graph.block_f64(c, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KmsStructure {
            graph,
            scc,
            adjacency,
            rho,
            tol,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn scc(&self) -> &SccDecomposition {
        &self.scc
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn component_rho(&self, component: usize) -> f64 {
        self.rho[component]
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.scc.component_of[v]
    }

    pub fn component_label(&self, component: usize) -> String {
        let names: Vec<&str> = self.scc.members(component).iter().map(|&v| self.graph.name(v)).collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn same_radius(&self, a: f64, b: f64) -> bool {
        same_location(a, b, self.tol.critical)
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        let len = self.graph.vertex_count();
        if v >= len {
            return Err(KmsError::IndexOutOfRange { index: v, len });
        }
        Ok(())
    }

    fn ancestors_of(&self, v: usize) -> VertexSet {
        self.graph.ancestors(&[v].into_iter().collect()).expect("vertex checked")
    }

    fn descendants_of(&self, v: usize) -> VertexSet {
        self.graph.descendants(&[v].into_iter().collect()).expect("vertex checked")
    }

    /// Largest component spectral radius over a union of whole components.
    fn radius_over(&self, set: &VertexSet) -> f64 {
        set.iter()
            .map(|&u| self.rho[self.scc.component_of[u]])
            .fold(0.0, f64::max)
    }

    /// `e^{beta_v}`: the largest spectral radius of a component reaching `v`,
    /// snapped to exactly 1 when it is 1 within tolerance.
    pub fn critical_radius(&self, v: usize) -> Result<f64> {
        self.check_vertex(v)?;
        let rho = self.radius_over(&self.ancestors_of(v));
        Ok(if self.same_radius(rho, 1.0) { 1.0 } else { rho })
    }

    /// Critical inverse temperature of `v`; `-inf` when no cycle reaches `v`.
    pub fn beta_v(&self, v: usize) -> Result<f64> {
        let rho = self.critical_radius(v)?;
        Ok(if rho == 0.0 { f64::NEG_INFINITY } else { rho.ln() })
    }

    /// Like [`KmsStructure::beta_v`] but fails unless `beta_v > 0`.
    pub fn positive_beta_v(&self, v: usize) -> Result<f64> {
        let beta_v = self.beta_v(v)?;
        if beta_v > 0.0 {
            Ok(beta_v)
        } else {
            Err(KmsError::NoPositiveCriticalTemperature {
                vertex: self.graph.name(v).to_owned(),
                beta_v,
            })
        }
    }

    /// Solves `(I - e^{-beta} A_R) y = b` on the vertex subset `set`.
    fn restricted_solve(&self, set: &[usize], beta: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let block = self.graph.block_f64(set, set);
        ShiftedSystem::new(&block, (-beta).exp())?.solve(b)
    }

    fn check_convergence(&self, set: &VertexSet, beta: f64) -> Result<()> {
        let rho = self.radius_over(set);
        if rho > 0.0 && !(beta > rho.ln()) {
            return Err(KmsError::SeriesDivergent {
                beta,
                threshold: rho.ln(),
            });
        }
        Ok(())
    }

    /// `Z_{w,v}(beta)`, the generating function of paths from `w` to `v`.
    pub fn partition(&self, w: usize, v: usize, beta: f64) -> Result<f64> {
        self.check_vertex(w)?;
        self.check_vertex(v)?;
        let region: VertexSet = self
            .ancestors_of(v)
            .intersection(&self.descendants_of(w))
            .copied()
            .collect();
        if region.is_empty() {
            return Ok(0.0);
        }
        self.check_convergence(&region, beta)?;
        let order: Vec<usize> = region.iter().copied().collect();
        let target = order.binary_search(&v).expect("v lies in its own ancestor set");
        let source = order.binary_search(&w).expect("w lies in its own descendant set");
        let rhs = DVector::from_fn(order.len(), |i, _| if i == target { 1.0 } else { 0.0 });
        Ok(self.restricted_solve(&order, beta, &rhs)?[source])
    }

    /// `[Z_{w,v}(beta)]_w` for every vertex `w`, zero off the ancestors of `v`.
    pub fn partition_column(&self, v: usize, beta: f64) -> Result<Vec<f64>> {
        self.check_vertex(v)?;
        let region = self.ancestors_of(v);
        self.check_convergence(&region, beta)?;
        let order: Vec<usize> = region.iter().copied().collect();
        let target = order.binary_search(&v).expect("v lies in its own ancestor set");
        let rhs = DVector::from_fn(order.len(), |i, _| if i == target { 1.0 } else { 0.0 });
        let y = self.restricted_solve(&order, beta, &rhs)?;
        let mut column = vec![0.0; self.graph.vertex_count()];
        for (i, &u) in order.iter().enumerate() {
            column[u] = y[i];
        }
        Ok(column)
    }

    /// The partition function `Z_v(beta)` of paths ending at `v`.
    pub fn partition_vertex(&self, v: usize, beta: f64) -> Result<f64> {
        Ok(self.partition_column(v, beta)?.iter().sum())
    }

    /// `Z_v^C(beta) = sum_{w in C} Z_{w,v}(beta)`
    pub fn partition_from_component(&self, component: usize, v: usize, beta: f64) -> Result<f64> {
        if component >= self.scc.len() {
            return Err(KmsError::NotAComponent);
        }
        let column = self.partition_column(v, beta)?;
        Ok(self.scc.members(component).iter().map(|&w| column[w]).sum())
    }

    /// `Z_{w,v}^C(beta)`, the generating function of the paths from `w` to
    /// `v` that pass through `C`, each path counted once. Cutting a path at
    /// its first vertex in `C` gives `sum_{w' in C} Z'_{w,w'} Z_{w',v}` with
    /// `Z'` counting paths that meet `C` only at their end; this coincides
    /// with `Z_{w,v}` when `w` or `v` lies in `C`. Evaluated as
    /// `Z_{w,v}(E) - Z_{w,v}(E minus C)`.
    pub fn partition_through_component(
        &self,
        w: usize,
        component: usize,
        v: usize,
        beta: f64,
    ) -> Result<f64> {
        if component >= self.scc.len() {
            return Err(KmsError::NotAComponent);
        }
        let total = self.partition(w, v, beta)?;
        let members = self.scc.members(component);
        if members.contains(&w) || members.contains(&v) || total == 0.0 {
            return Ok(total);
        }
        let region: VertexSet = self
            .ancestors_of(v)
            .intersection(&self.descendants_of(w))
            .filter(|u| members.binary_search(u).is_err())
            .copied()
            .collect();
        let order: Vec<usize> = region.iter().copied().collect();
        let avoiding = match (order.binary_search(&w), order.binary_search(&v)) {
            (Ok(source), Ok(target)) => {
                let rhs = DVector::from_fn(order.len(), |i, _| if i == target { 1.0 } else { 0.0 });
                self.restricted_solve(&order, beta, &rhs)?[source]
            }
            _ => 0.0,
        };
        Ok(total - avoiding)
    }

    /// The extremal type-I state `phi_{beta,v}`.
    pub fn type_i_state(&self, v: usize, beta: f64) -> Result<StateVector> {
        let beta_v = self.beta_v(v)?;
        if !(beta > beta_v) {
            return Err(KmsError::BelowCriticalTemperature { beta, beta_v });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(KmsError::InvalidParameter(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )));
        }
        let column = self.partition_column(v, beta)?;
        let total: f64 = column.iter().sum();
        let p = column.iter().map(|z| z / total).collect();
        let mut delta = vec![0.0; column.len()];
        delta[v] = 1.0 / total;
        Ok(StateVector {
            beta,
            p,
            delta,
            supported_at_infinity: false,
        })
    }

    /// Every component distinct from `component` that has a path into it.
    fn strict_ancestor_components(&self, component: usize) -> impl Iterator<Item = usize> {
        let mut set = self.scc.ancestor_components(&self.graph, component);
        set.remove(&component);
        set.into_iter()
    }

    /// `rho(A_C') < rho(A_C)` for every other component `C'` reaching `C`.
    pub fn is_minimal(&self, component: usize) -> bool {
        let rho = self.rho[component];
        self.strict_ancestor_components(component)
            .all(|other| self.rho[other] < rho && !self.same_radius(self.rho[other], rho))
    }

    /// Member of `pmc(E)`: minimal with spectral radius above 1.
    pub fn is_pmc(&self, component: usize) -> bool {
        let rho = self.rho[component];
        rho > 1.0 && !self.same_radius(rho, 1.0) && self.is_minimal(component)
    }

    pub fn minimal_components(&self) -> Vec<ComponentTemperature> {
        (0..self.scc.len())
            .filter(|&c| self.is_pmc(c))
            .map(|c| ComponentTemperature {
                component: c,
                members: self.scc.members(c).to_vec(),
                rho: self.rho[c],
                beta: self.rho[c].ln(),
            })
            .collect()
    }

    /// `crit_v(E)`: members of `pmc(E)` with a path to `v` and `beta_C = beta_v`.
    pub fn crit_v(&self, v: usize) -> Result<Vec<usize>> {
        self.positive_beta_v(v)?;
        let radius = self.critical_radius(v)?;
        let reaching = self.scc.ancestor_components(&self.graph, self.component_of(v));
        Ok(reaching
            .into_iter()
            .filter(|&c| self.is_pmc(c) && self.same_radius(self.rho[c], radius))
            .collect())
    }

    /// Extends a `beta`-harmonic vector `h0` of `E_K` (values listed in
    /// increasing vertex order of `k`) to the unique `beta`-harmonic vector of
    /// `E`: `h_K = h0`, `h_D = (e^beta I - A_D)^{-1} A_{D,K} h0` on
    /// `D = S_K \ K`, and zero elsewhere.
    pub fn harmonic_extend(&self, k: &VertexSet, h0: &[f64], beta: f64) -> Result<HarmonicVector> {
        if k.is_empty() {
            return Err(KmsError::InvalidParameter("empty vertex set K".into()));
        }
        let values = self.extend_unchecked(k, h0, beta)?;
        if h0.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(KmsError::NotHarmonic("negative or non-finite entry in h0".into()));
        }
        let kv: Vec<usize> = k.iter().copied().collect();
        let e_beta = beta.exp();

        let a_k = self.graph.block_f64(&kv, &kv);
        let h0v = DVector::from_column_slice(h0);
        let residual = (&a_k * &h0v - &h0v * e_beta).amax();
        let scale = e_beta * h0v.amax();
        if residual > self.tol.harmonic * scale {
            return Err(KmsError::NotHarmonic(format!(
                "h0 is not {beta}-harmonic on E_K (residual {residual:e})"
            )));
        }
        Ok(HarmonicVector { beta, values })
    }

    /// The extension formula of [`KmsStructure::harmonic_extend`] without
    /// checking that `h0` is harmonic on `E_K`.
    pub fn extend_unchecked(&self, k: &VertexSet, h0: &[f64], beta: f64) -> Result<Vec<f64>> {
        if h0.len() != k.len() {
            return Err(KmsError::InvalidParameter(format!(
                "{} values for a set of {} vertices",
                h0.len(),
                k.len()
            )));
        }
        let ancestors = self.graph.ancestors(k)?;
        let kv: Vec<usize> = k.iter().copied().collect();
        let e_beta = beta.exp();
        let mut values = vec![0.0; self.graph.vertex_count()];
        for (i, &u) in kv.iter().enumerate() {
            values[u] = h0[i];
        }
        let d: Vec<usize> = ancestors.difference(k).copied().collect();
        if !d.is_empty() {
            let a_d = self.graph.block_f64(&d, &d);
            let rho_d = spectral::spectral_radius(&a_d)?;
            if !(rho_d < e_beta) || self.same_radius(rho_d, e_beta) {
                return Err(KmsError::NotHarmonic(format!(
                    "rho(A_D) = {rho_d} is not below e^beta = {e_beta}"
                )));
            }
            let a_dk = self.graph.block_f64(&d, &kv);
            let x = (-beta).exp();
            // (e^b I - A_D)^{-1} = e^{-b} (I - e^{-b} A_D)^{-1}
            let rhs = (&a_dk * DVector::from_column_slice(h0)) * x;
            let h_d = ShiftedSystem::new(&a_d, x)?.solve(&rhs)?;
            for (i, &u) in d.iter().enumerate() {
                values[u] = h_d[i];
            }
        }
        Ok(values)
    }

    /// Checks `A h = e^beta h`, nonnegativity, and the vanishing of `h` on
    /// components that no harmonic vector can charge: those with
    /// `rho(A_C) > e^beta`, and critical components outside `pmc(E)`.
    pub fn is_harmonic(&self, h: &HarmonicVector) -> HarmonicCheck {
        let n = self.graph.vertex_count();
        let fail = |relative_residual: f64, zero_vector: bool, message: String| HarmonicCheck {
            harmonic: false,
            relative_residual,
            zero_vector,
            violation: Some(message),
        };
        if h.values.len() != n {
            return fail(f64::INFINITY, false, format!("vector of length {} for {n} vertices", h.values.len()));
        }
        let hv = DVector::from_column_slice(&h.values);
        let norm = hv.amax();
        let zero_vector = norm == 0.0;
        let e_beta = h.beta.exp();
        let residual = (&self.adjacency * &hv - &hv * e_beta).amax();
        let relative_residual = if zero_vector { 0.0 } else { residual / (e_beta * norm) };

        if let Some(w) = (0..n).find(|&w| !(h.values[w] >= 0.0 && h.values[w].is_finite())) {
            return fail(
                relative_residual,
                zero_vector,
                format!("negative or non-finite entry at `{}`", self.graph.name(w)),
            );
        }
        if relative_residual > self.tol.harmonic {
            let worst = (0..n)
                .max_by(|&a, &b| {
                    let ra = ((&self.adjacency * &hv)[a] - e_beta * hv[a]).abs();
                    let rb = ((&self.adjacency * &hv)[b] - e_beta * hv[b]).abs();
                    ra.total_cmp(&rb)
                })
                .unwrap_or(0);
            return fail(
                relative_residual,
                zero_vector,
                format!(
                    "eigen-equation violated at `{}` (relative residual {relative_residual:e})",
                    self.graph.name(worst)
                ),
            );
        }
        for c in 0..self.scc.len() {
            let rho = self.rho[c];
            let above = rho > e_beta && !self.same_radius(rho, e_beta);
            let critical_not_pmc = self.same_radius(rho, e_beta) && !self.is_pmc(c);
            if !(above || critical_not_pmc) {
                continue;
            }
            let size = self.scc.members(c).iter().map(|&w| h.values[w]).fold(0.0, f64::max);
            if size > self.tol.vanishing * norm {
                let reason = if above {
                    "spectral radius above e^beta"
                } else {
                    "critical component that is not minimal"
                };
                return fail(
                    relative_residual,
                    zero_vector,
                    format!("nonzero on component {} ({reason})", self.component_label(c)),
                );
            }
        }
        HarmonicCheck {
            harmonic: true,
            relative_residual,
            zero_vector,
            violation: None,
        }
    }

    /// The extremal state `psi_C` at `beta_C = log rho(A_C)` for `C` in `pmc(E)`.
    pub fn psi(&self, component: usize) -> Result<StateVector> {
        if component >= self.scc.len() {
            return Err(KmsError::NotAComponent);
        }
        if !self.is_pmc(component) {
            return Err(KmsError::NotMinimal(self.component_label(component)));
        }
        let rho = self.rho[component];
        let beta = rho.ln();
        let k: VertexSet = (0..self.scc.len())
            .filter(|&c| self.is_pmc(c) && self.same_radius(self.rho[c], rho))
            .flat_map(|c| self.scc.members(c).iter().copied())
            .collect();
        let members = self.scc.members(component);
        let perron = spectral::perron_data(&self.graph.block_f64(members, members))?;
        let h0: Vec<f64> = k
            .iter()
            .map(|u| match members.binary_search(u) {
                Ok(i) => perron.left[i],
                Err(_) => 0.0,
            })
            .collect();
        let h = self.harmonic_extend(&k, &h0, beta)?;
        let total: f64 = h.values.iter().sum();
        Ok(StateVector {
            beta,
            p: h.values.iter().map(|x| x / total).collect(),
            delta: vec![0.0; h.values.len()],
            supported_at_infinity: true,
        })
    }
}
