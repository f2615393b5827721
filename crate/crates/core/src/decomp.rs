//! Maximal-path analysis on the component graph, the critical limit state
//! `phi_v` and its convex decomposition `phi_v = sum_C lambda_C psi_C`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{KmsError, Result};
use crate::extrapolate::{richardson, Extrapolated, ExtrapolationSettings};
use crate::genfun::{component_class, PoleClass};
use crate::graph::CondensationGraph;
use crate::kms::{KmsStructure, StateVector, Tolerances};

/// Default threshold separating positive coefficients from extrapolation noise.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-4;
/// Bound on `|sum lambda - 1|` and on the reconstruction error of `phi_v`.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSettings {
    pub extrapolation: ExtrapolationSettings,
    pub support_threshold: f64,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        DecompositionSettings {
            extrapolation: ExtrapolationSettings::default(),
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCriticalityAnalysis {
    pub base: usize,
    pub beta_v: f64,
    /// Components of `B(E, C0)` with spectral radius `e^{beta_v}`.
    pub critical_components: Vec<usize>,
    /// Largest number of critical components on a path from `C` to `C0`.
    pub max_critical: BTreeMap<usize, u32>,
    pub m: u32,
    /// Critical components attaining `M`.
    pub support: Vec<usize>,
}

impl PathCriticalityAnalysis {
    pub fn m_of(&self, component: usize) -> Option<u32> {
        self.max_critical.get(&component).copied()
    }
}

/// Longest-path dynamic programme over `B`, sinks first, counting
/// critical components (the base included).
pub fn analyze_paths(
    b: &CondensationGraph,
    beta_v: f64,
    rho: &[f64],
    tol: f64,
) -> Result<PathCriticalityAnalysis> {
    let order = b.topological_order()?;
    let radius = beta_v.exp();
    let is_critical = |c: usize| crate::genfun::same_location(rho[c], radius, tol);
    let mut max_critical = BTreeMap::new();
    for &c in order.iter().rev() {
        let below = if c == b.base {
            0
        } else {
            b.successors(c).map(|d| max_critical[&d]).max().unwrap_or(0)
        };
        max_critical.insert(c, below + u32::from(is_critical(c)));
    }
    let m = max_critical.values().copied().max().unwrap_or(0);
    let critical_components: Vec<usize> = b.vertices.iter().copied().filter(|&c| is_critical(c)).collect();
    let support = critical_components
        .iter()
        .copied()
        .filter(|c| max_critical[c] == m)
        .collect();
    Ok(PathCriticalityAnalysis {
        base: b.base,
        beta_v,
        critical_components,
        max_critical,
        m,
        support,
    })
}

pub fn analyze_vertex(structure: &KmsStructure, v: usize) -> Result<PathCriticalityAnalysis> {
    let beta_v = structure.positive_beta_v(v)?;
    let base = structure.component_of(v);
    let b = CondensationGraph::new(structure.graph(), structure.scc(), base)?;
    let rho: Vec<f64> = (0..structure.scc().len()).map(|c| structure.component_rho(c)).collect();
    analyze_paths(&b, beta_v, &rho, structure.tolerances().critical)
}

/// Semiring classes `[Z_{w,v}]` for every `w` in component `C`, by
/// `cls(C) = [Z_C] * sum_{C -> C'} cls(C')` over `B(E, C_v)`.
fn component_classes(structure: &KmsStructure, v: usize) -> Result<BTreeMap<usize, PoleClass>> {
    let base = structure.component_of(v);
    let b = CondensationGraph::new(structure.graph(), structure.scc(), base)?;
    let tol = structure.tolerances().critical;
    let mut classes: BTreeMap<usize, PoleClass> = BTreeMap::new();
    for &c in b.topological_order()?.iter().rev() {
        let own = component_class(structure.component_rho(c))?;
        let below = if c == base {
            PoleClass::UNIT
        } else {
            b.successors(c)
                .map(|d| classes[&d])
                .reduce(|x, y| x.add_with_tolerance(y, tol))
                .expect("every non-base vertex of B has a successor")
        };
        classes.insert(c, own.mul_with_tolerance(below, tol));
    }
    Ok(classes)
}

/// Pole class of `Z_{w,v}`; `NoPath` when `w E^* v` is empty.
pub fn class_of_z(structure: &KmsStructure, w: usize, v: usize) -> Result<PoleClass> {
    let classes = component_classes(structure, v)?;
    classes
        .get(&structure.component_of(w))
        .copied()
        .ok_or_else(|| KmsError::NoPath {
            from: structure.graph().name(w).to_owned(),
            to: structure.graph().name(v).to_owned(),
        })
}

/// Pole class of `Z_v = sum_w Z_{w,v}`.
pub fn class_of_z_v(structure: &KmsStructure, v: usize) -> Result<PoleClass> {
    let tol = structure.tolerances().critical;
    Ok(component_classes(structure, v)?
        .into_values()
        .fold(PoleClass::UNIT, |acc, c| acc.add_with_tolerance(c, tol)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    pub vertex: usize,
    pub beta_v: f64,
    /// Entries with `M_{C(w)} < M`, or off the ancestors of `v`, are set to
    /// zero and the rest renormalized.
    pub state: StateVector,
    /// Extrapolated ratios before zeroing.
    pub raw: Vec<f64>,
    pub extrapolation: Extrapolated,
}

pub fn phi_v(structure: &KmsStructure, v: usize, settings: &ExtrapolationSettings) -> Result<LimitState> {
    let analysis = analyze_vertex(structure, v)?;
    phi_v_with(structure, v, &analysis, settings)
}

fn phi_v_with(
    structure: &KmsStructure,
    v: usize,
    analysis: &PathCriticalityAnalysis,
    settings: &ExtrapolationSettings,
) -> Result<LimitState> {
    let beta_v = analysis.beta_v;
    let ratios = |eps: f64| -> Result<Vec<f64>> {
        let column = structure.partition_column(v, beta_v + eps)?;
        let total: f64 = column.iter().sum();
        Ok(column.into_iter().map(|z| z / total).collect())
    };
    let extrapolation = richardson(ratios, settings)?;
    let raw = extrapolation.value.clone();

    let mut p: Vec<f64> = raw
        .iter()
        .enumerate()
        .map(|(w, &x)| match analysis.m_of(structure.component_of(w)) {
            Some(m) if m == analysis.m => x,
            _ => 0.0,
        })
        .collect();
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(KmsError::Invariant(format!(
            "limit state of `{}` has no mass on its maximal components",
            structure.graph().name(v)
        )));
    }
    p.iter_mut().for_each(|x| *x /= total);
    let n = p.len();
    Ok(LimitState {
        vertex: v,
        beta_v,
        state: StateVector {
            beta: beta_v,
            p,
            delta: vec![0.0; n],
            supported_at_infinity: true,
        },
        raw,
        extrapolation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeight {
    pub component: usize,
    /// Member of `crit_v(E)`.
    pub critical: bool,
    pub lambda: f64,
    /// Coefficient computed from the extrapolated ratios before zeroing.
    pub lambda_raw: f64,
    /// `h^C`, zero for components outside `crit_v(E)`.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDiagnostics {
    pub extrapolation_residual: f64,
    pub extrapolation_level: usize,
    pub extrapolation_converged: bool,
    pub lambda_sum_error: f64,
    pub reconstruction_error: f64,
    pub harmonic_residual: f64,
    pub support_threshold: f64,
    pub tolerances: Tolerances,
    pub extrapolation: ExtrapolationSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub vertex: usize,
    pub beta_v: f64,
    pub analysis: PathCriticalityAnalysis,
    pub crit_v: Vec<usize>,
    /// One entry per member of `pmc(E)`.
    pub weights: Vec<ComponentWeight>,
    pub phi: LimitState,
    pub combinatorial_support: Vec<usize>,
    pub numeric_support: Vec<usize>,
    pub z_v_class: PoleClass,
    pub diagnostics: DecompositionDiagnostics,
}

impl DecompositionReport {
    pub fn lambda(&self, component: usize) -> Option<f64> {
        self.weights.iter().find(|w| w.component == component).map(|w| w.lambda)
    }
}

fn component_h(structure: &KmsStructure, component: usize, values: &[f64], beta: f64) -> Result<Vec<f64>> {
    let k = structure.scc().member_set(component);
    let h0: Vec<f64> = k.iter().map(|&w| values[w]).collect();
    structure.extend_unchecked(&k, &h0, beta)
}

pub fn decompose(structure: &KmsStructure, v: usize, settings: &DecompositionSettings) -> Result<DecompositionReport> {
    let analysis = analyze_vertex(structure, v)?;
    let crit = structure.crit_v(v)?;
    if crit.is_empty() {
        return Err(KmsError::Invariant(format!(
            "no critical minimal component reaches `{}` although beta_v > 0",
            structure.graph().name(v)
        )));
    }
    let label = |cs: &[usize]| cs.iter().map(|&c| structure.component_label(c)).collect::<Vec<_>>();
    if analysis.support.iter().any(|c| !crit.contains(c)) {
        return Err(KmsError::Invariant(format!(
            "maximal-path support {:?} not contained in crit_v {:?}",
            label(&analysis.support),
            label(&crit)
        )));
    }

    let z_v_class = class_of_z_v(structure, v)?;
    let x_v = (-analysis.beta_v).exp();
    let tol = structure.tolerances();
    let expected = PoleClass::new(x_v, analysis.m)?;
    if !z_v_class.approx_eq(expected, tol.critical) {
        return Err(KmsError::Invariant(format!(
            "class of Z_v is {z_v_class}, path analysis predicts {expected}"
        )));
    }
    let classes = component_classes(structure, v)?;
    for (&c, class) in &classes {
        let order = if class.is_unit() || !crate::genfun::same_location(class.x(), x_v, tol.critical) {
            0
        } else {
            class.order()
        };
        if order != analysis.max_critical[&c] {
            return Err(KmsError::Invariant(format!(
                "class of component {} is {class}, path analysis gives M_C = {}",
                structure.component_label(c),
                analysis.max_critical[&c]
            )));
        }
    }

    let phi = phi_v_with(structure, v, &analysis, &settings.extrapolation)?;
    let n = structure.graph().vertex_count();
    let mut weights = Vec::new();
    let mut reconstruction = vec![0.0; n];
    for pmc in structure.minimal_components() {
        let c = pmc.component;
        if !crit.contains(&c) {
            weights.push(ComponentWeight {
                component: c,
                critical: false,
                lambda: 0.0,
                lambda_raw: 0.0,
                h: vec![0.0; n],
            });
            continue;
        }
        let h = component_h(structure, c, &phi.state.p, analysis.beta_v)?;
        let h_raw = component_h(structure, c, &phi.raw, analysis.beta_v)?;
        for (r, x) in reconstruction.iter_mut().zip(&h) {
            *r += x;
        }
        weights.push(ComponentWeight {
            component: c,
            critical: true,
            lambda: h.iter().sum(),
            lambda_raw: h_raw.iter().sum(),
            h,
        });
    }

    let numeric_support: Vec<usize> = weights
        .iter()
        .filter(|w| w.lambda_raw > settings.support_threshold)
        .map(|w| w.component)
        .collect();
    if numeric_support != analysis.support {
        return Err(KmsError::SupportMismatch {
            combinatorial: label(&analysis.support),
            numeric: label(&numeric_support),
        });
    }

    let lambda_sum_error = (weights.iter().map(|w| w.lambda).sum::<f64>() - 1.0).abs();
    if lambda_sum_error > DECOMPOSITION_TOLERANCE {
        return Err(KmsError::Invariant(format!(
            "coefficients sum to 1 only within {lambda_sum_error:e}"
        )));
    }
    let reconstruction_error = reconstruction
        .iter()
        .zip(&phi.state.p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if reconstruction_error > DECOMPOSITION_TOLERANCE {
        return Err(KmsError::Invariant(format!(
            "sum of lambda_C psi_C differs from phi_v by {reconstruction_error:e}"
        )));
    }
    let harmonic_residual = structure.is_harmonic(&phi.state.harmonic()).relative_residual;

    Ok(DecompositionReport {
        vertex: v,
        beta_v: analysis.beta_v,
        crit_v: crit,
        weights,
        combinatorial_support: analysis.support.clone(),
        numeric_support,
        z_v_class,
        diagnostics: DecompositionDiagnostics {
            extrapolation_residual: phi.extrapolation.residual,
            extrapolation_level: phi.extrapolation.level,
            extrapolation_converged: phi.extrapolation.converged,
            lambda_sum_error,
            reconstruction_error,
            harmonic_residual,
            support_threshold: settings.support_threshold,
            tolerances: tol,
            extrapolation: settings.extrapolation,
        },
        analysis,
        phi,
    })
}
