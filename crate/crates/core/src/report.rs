//! Machine-readable reports and their plain-text rendering.
//!
//! Floats are written with 17 significant digits so that a report parses
//! back to bit-identical values. Maps are keyed by vertex names or component
//! labels and ordered, which makes reports byte-for-byte reproducible.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::decomp::{DecompositionReport, DecompositionSettings};
use crate::error::{KmsError, Result};
use crate::kms::{KmsStructure, Tolerances};
use crate::oracle;

/// A finite float serialized with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite value {} in report", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Number;
        impl Visitor<'_> for Number {
            type Value = Sig17;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Sig17, E> {
                Ok(Sig17(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Sig17, E> {
                Ok(Sig17(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Sig17, E> {
                Ok(Sig17(v as f64))
            }
        }
        deserializer.deserialize_f64(Number)
    }
}

impl fmt::Display for Sig17 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.10}", self.0)
    }
}

fn finite(x: f64) -> Option<Sig17> {
    x.is_finite().then_some(Sig17(x))
}

/// Best rational approximation with denominator at most `max_den`, from the
/// continued-fraction convergents of `x`.
pub fn approximate_fraction(x: f64, max_den: u64) -> (i64, u64) {
    if !x.is_finite() {
        return (0, 1);
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        return (x.round() as i64, 1);
    }
    (h1 as i64, k1 as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub source: String,
    pub target: String,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub label: String,
    pub members: Vec<String>,
    pub rho: Sig17,
    /// `log rho`, null when `rho = 0`.
    pub beta: Option<Sig17>,
    pub minimal: bool,
    pub pmc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub vertices: Vec<String>,
    pub edge_count: u64,
    pub edges: Vec<EdgeEntry>,
    pub components: Vec<ComponentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcEntry {
    pub component: String,
    pub rho: Sig17,
    pub beta: Sig17,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEntry {
    pub component: String,
    pub beta: Sig17,
    pub p: BTreeMap<String, Sig17>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatesSection {
    pub vertex: String,
    pub beta: Sig17,
    pub beta_v: Option<Sig17>,
    pub z_v: Sig17,
    pub p: BTreeMap<String, Sig17>,
    pub delta: BTreeMap<String, Sig17>,
    pub recursion_residual: Sig17,
    pub psi: Vec<PsiEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleClassEntry {
    /// Pole location in `x = e^{-beta}`, null for the bounded class.
    pub x: Option<Sig17>,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDiagnosticsEntry {
    pub extrapolation_residual: Sig17,
    pub extrapolation_level: usize,
    pub extrapolation_converged: bool,
    pub lambda_sum_error: Sig17,
    pub reconstruction_error: Sig17,
    pub harmonic_residual: Sig17,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSection {
    pub vertex: String,
    pub beta_v: Sig17,
    pub m: u32,
    pub max_critical: BTreeMap<String, u32>,
    pub critical_components: Vec<String>,
    pub crit_v: Vec<String>,
    pub combinatorial_support: Vec<String>,
    pub numeric_support: Vec<String>,
    pub lambda: BTreeMap<String, Sig17>,
    pub lambda_raw: BTreeMap<String, Sig17>,
    /// Present with `--exact-fractions`: approximate rationalizations of lambda.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_approximate_fractions: Option<BTreeMap<String, String>>,
    pub h: BTreeMap<String, BTreeMap<String, Sig17>>,
    pub phi: BTreeMap<String, Sig17>,
    pub z_v_class: PoleClassEntry,
    pub diagnostics: DecompositionDiagnosticsEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationEntry {
    pub w: String,
    pub v: String,
    pub beta: Sig17,
    pub value: Sig17,
    /// Null when the series diverges.
    pub tail_bound: Option<Sig17>,
    pub exact: Sig17,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationEntry {
    pub w: String,
    pub v: String,
    pub beta: Sig17,
    pub lifted_paths: usize,
    pub factorized: Sig17,
    pub direct: Sig17,
    pub relative_error: Sig17,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationEntry {
    pub w: String,
    pub v: String,
    pub max_len: usize,
    pub histogram: Vec<String>,
    pub groups: usize,
    pub histogram_matches: bool,
    pub groups_reassemble: bool,
    pub groups_factorize: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub truncation: usize,
    pub truncations: Vec<TruncationEntry>,
    pub factorizations: Vec<FactorizationEntry>,
    pub enumerations: Vec<EnumerationEntry>,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Every tolerance and grid parameter the report depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol_critical: Sig17,
    pub tol_harmonic: Sig17,
    pub tol_vanishing: Sig17,
    pub support_threshold: Sig17,
    pub eps0: Sig17,
    pub grid_depth: usize,
    pub max_order: usize,
    pub stop_tolerance: Sig17,
    pub accept_tolerance: Sig17,
}

impl Settings {
    pub fn new(t: Tolerances, d: DecompositionSettings) -> Self {
        Settings {
            tol_critical: Sig17(t.critical),
            tol_harmonic: Sig17(t.harmonic),
            tol_vanishing: Sig17(t.vanishing),
            support_threshold: Sig17(d.support_threshold),
            eps0: Sig17(d.extrapolation.eps0),
            grid_depth: d.extrapolation.depth,
            max_order: d.extrapolation.max_order,
            stop_tolerance: Sig17(d.extrapolation.stop_tolerance),
            accept_tolerance: Sig17(d.extrapolation.accept_tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: ToolInfo,
    pub command: String,
    pub graph: GraphSummary,
    pub pmc: Vec<PmcEntry>,
    /// Null for vertices that no cycle reaches.
    pub beta_v: BTreeMap<String, Option<Sig17>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub states: Option<StatesSection>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub decompositions: Vec<DecompositionSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleSection>,
    pub settings: Settings,
}

fn by_name(s: &KmsStructure, values: &[f64]) -> BTreeMap<String, Sig17> {
    values
        .iter()
        .enumerate()
        .map(|(w, &x)| (s.graph().name(w).to_owned(), Sig17(x)))
        .collect()
}

fn labels(s: &KmsStructure, components: &[usize]) -> Vec<String> {
    components.iter().map(|&c| s.component_label(c)).collect()
}

impl GraphSummary {
    pub fn new(s: &KmsStructure) -> Self {
        let g = s.graph();
        let n = g.vertex_count();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let m = g.multiplicity(a, b);
                if m > 0 {
                    edges.push(EdgeEntry {
                        source: g.name(a).to_owned(),
                        target: g.name(b).to_owned(),
                        multiplicity: m,
                    });
                }
            }
        }
        let components = (0..s.scc().len())
            .map(|c| {
                let rho = s.component_rho(c);
                ComponentSummary {
                    label: s.component_label(c),
                    members: s.scc().members(c).iter().map(|&v| g.name(v).to_owned()).collect(),
                    rho: Sig17(rho),
                    beta: finite(rho.ln()),
                    minimal: s.is_minimal(c),
                    pmc: s.is_pmc(c),
                }
            })
            .collect();
        GraphSummary {
            vertices: g.names().to_vec(),
            edge_count: g.edge_count(),
            edges,
            components,
        }
    }
}

impl ReportDocument {
    /// Graph summary, `pmc(E)` and every `beta_v`.
    pub fn analyze(s: &KmsStructure, command: &str, decomposition: DecompositionSettings) -> Result<Self> {
        let pmc = s
            .minimal_components()
            .into_iter()
            .map(|t| PmcEntry {
                component: s.component_label(t.component),
                rho: Sig17(t.rho),
                beta: Sig17(t.beta),
            })
            .collect();
        let beta_v = (0..s.graph().vertex_count())
            .map(|v| Ok((s.graph().name(v).to_owned(), finite(s.beta_v(v)?))))
            .collect::<Result<_>>()?;
        Ok(ReportDocument {
            tool: ToolInfo {
                name: "kms-graph".into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            command: command.into(),
            graph: GraphSummary::new(s),
            pmc,
            beta_v,
            states: None,
            decompositions: Vec::new(),
            oracle: None,
            settings: Settings::new(s.tolerances(), decomposition),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| KmsError::InvalidParameter(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| KmsError::InvalidParameter(format!("malformed report: {e}")))
    }

    pub fn to_table(&self) -> String {
        render_table(self)
    }
}

/// The type-I state at `beta` together with every `psi_C`.
pub fn states_section(s: &KmsStructure, v: usize, beta: f64) -> Result<StatesSection> {
    let state = s.type_i_state(v, beta)?;
    let psi = s
        .minimal_components()
        .into_iter()
        .map(|t| {
            let psi = s.psi(t.component)?;
            Ok(PsiEntry {
                component: s.component_label(t.component),
                beta: Sig17(psi.beta),
                p: by_name(s, &psi.p),
            })
        })
        .collect::<Result<_>>()?;
    Ok(StatesSection {
        vertex: s.graph().name(v).to_owned(),
        beta: Sig17(beta),
        beta_v: finite(s.beta_v(v)?),
        z_v: Sig17(1.0 / state.delta[v]),
        p: by_name(s, &state.p),
        delta: by_name(s, &state.delta),
        recursion_residual: Sig17(state.recursion_residual(s.adjacency())),
        psi,
    })
}

pub fn decomposition_section(s: &KmsStructure, r: &DecompositionReport, exact_fractions: bool) -> DecompositionSection {
    let lambda: BTreeMap<String, Sig17> = r
        .weights
        .iter()
        .map(|w| (s.component_label(w.component), Sig17(w.lambda)))
        .collect();
    let lambda_approximate_fractions = exact_fractions.then(|| {
        lambda
            .iter()
            .map(|(k, x)| {
                let (p, q) = approximate_fraction(x.0, 1_000_000);
                (k.clone(), format!("{p}/{q}"))
            })
            .collect()
    });
    DecompositionSection {
        vertex: s.graph().name(r.vertex).to_owned(),
        beta_v: Sig17(r.beta_v),
        m: r.analysis.m,
        max_critical: r
            .analysis
            .max_critical
            .iter()
            .map(|(&c, &m)| (s.component_label(c), m))
            .collect(),
        critical_components: labels(s, &r.analysis.critical_components),
        crit_v: labels(s, &r.crit_v),
        combinatorial_support: labels(s, &r.combinatorial_support),
        numeric_support: labels(s, &r.numeric_support),
        lambda,
        lambda_raw: r
            .weights
            .iter()
            .map(|w| (s.component_label(w.component), Sig17(w.lambda_raw)))
            .collect(),
        lambda_approximate_fractions,
        h: r
            .weights
            .iter()
            .filter(|w| w.critical)
            .map(|w| (s.component_label(w.component), by_name(s, &w.h)))
            .collect(),
        phi: by_name(s, &r.phi.state.p),
        z_v_class: PoleClassEntry {
            x: finite(r.z_v_class.x()),
            order: r.z_v_class.order(),
        },
        diagnostics: DecompositionDiagnosticsEntry {
            extrapolation_residual: Sig17(r.diagnostics.extrapolation_residual),
            extrapolation_level: r.diagnostics.extrapolation_level,
            extrapolation_converged: r.diagnostics.extrapolation_converged,
            lambda_sum_error: Sig17(r.diagnostics.lambda_sum_error),
            reconstruction_error: Sig17(r.diagnostics.reconstruction_error),
            harmonic_residual: Sig17(r.diagnostics.harmonic_residual),
        },
    }
}

/// Offset of the sampled inverse temperature above `log max(rho, 1)`.
pub const ORACLE_BETA_OFFSET: f64 = 0.5;
/// Relative rounding allowance when testing the truncation bracket.
pub const ORACLE_ROUNDING: f64 = 1e-10;
/// Tolerance of the factorization identity.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-8;
/// Path length used by `--enumerate`.
pub const ENUMERATION_LENGTH: usize = 12;

/// Runs the brute-force cross-checks on every connected pair of vertices.
pub fn oracle_section(s: &KmsStructure, truncation: usize, enumerate: bool) -> Result<OracleSection> {
    let g = s.graph();
    let beta = oracle::sample_beta(s, ORACLE_BETA_OFFSET);
    let pairs = oracle::connected_pairs(g)?;
    let name = |v: usize| g.name(v).to_owned();
    let mut failures = Vec::new();

    let mut truncations = Vec::new();
    for &(w, v) in &pairs {
        let t = oracle::truncated_z(g, w, v, beta, truncation)?;
        let exact = s.partition(w, v, beta)?;
        let passed = t.brackets(exact, ORACLE_ROUNDING);
        if !passed {
            failures.push(format!("truncated series does not bracket Z_{{{},{}}}", g.name(w), g.name(v)));
        }
        truncations.push(TruncationEntry {
            w: name(w),
            v: name(v),
            beta: Sig17(beta),
            value: Sig17(t.value),
            tail_bound: finite(t.tail_bound),
            exact: Sig17(exact),
            passed,
        });
    }

    let mut factorizations = Vec::new();
    if g.vertex_count() <= oracle::MAX_ENUMERATION_VERTICES {
        for &(w, v) in &pairs {
            let f = oracle::factorization_check(s, w, v, beta)?;
            let passed = f.relative_error <= FACTORIZATION_TOLERANCE;
            if !passed {
                failures.push(format!("factorization identity fails for ({}, {})", g.name(w), g.name(v)));
            }
            factorizations.push(FactorizationEntry {
                w: name(w),
                v: name(v),
                beta: Sig17(beta),
                lifted_paths: f.lifted_paths,
                factorized: Sig17(f.factorized),
                direct: Sig17(f.direct),
                relative_error: Sig17(f.relative_error),
                passed,
            });
        }
    }

    let mut enumerations = Vec::new();
    if enumerate {
        for &(w, v) in &pairs {
            let e = oracle::enumerate_paths(s, w, v, ENUMERATION_LENGTH)?;
            if !e.passed() {
                failures.push(format!("path enumeration disagrees for ({}, {})", g.name(w), g.name(v)));
            }
            enumerations.push(EnumerationEntry {
                w: name(w),
                v: name(v),
                max_len: e.max_len,
                histogram: e.histogram.iter().map(|c| c.to_string()).collect(),
                groups: e.groups.len(),
                histogram_matches: e.histogram_matches(),
                groups_reassemble: e.groups_reassemble(),
                groups_factorize: e.all_groups_factorize(),
                passed: e.passed(),
            });
        }
    }

    Ok(OracleSection {
        truncation,
        truncations,
        factorizations,
        enumerations,
        passed: failures.is_empty(),
        failures,
    })
}

fn render_table(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} :: {}", doc.tool.name, doc.tool.version, doc.command);
    let _ = writeln!(
        out,
        "graph: {} vertices, {} edges, {} components",
        doc.graph.vertices.len(),
        doc.graph.edge_count,
        doc.graph.components.len()
    );
    let _ = writeln!(out, "\n{:<24} {:>18} {:>18}  flags", "component", "rho", "beta");
    for c in &doc.graph.components {
        let beta = c.beta.map_or("-".to_owned(), |b| b.to_string());
        let flags = match (c.pmc, c.minimal) {
            (true, _) => "pmc",
            (false, true) => "minimal",
            _ => "",
        };
        let _ = writeln!(out, "{:<24} {:>18} {:>18}  {}", c.label, c.rho.to_string(), beta, flags);
    }
    let _ = writeln!(out, "\n{:<24} {:>18}", "vertex", "beta_v");
    for (v, b) in &doc.beta_v {
        let _ = writeln!(out, "{:<24} {:>18}", v, b.map_or("-inf".to_owned(), |b| b.to_string()));
    }
    if let Some(st) = &doc.states {
        let _ = writeln!(out, "\ntype-I state at vertex {} with beta = {}", st.vertex, st.beta);
        let _ = writeln!(out, "Z_v = {}   recursion residual = {:e}", st.z_v, st.recursion_residual.0);
        let _ = writeln!(out, "{:<24} {:>18} {:>18}", "vertex", "p", "delta");
        for (v, p) in &st.p {
            let _ = writeln!(out, "{:<24} {:>18} {:>18}", v, p.to_string(), st.delta[v].to_string());
        }
        for psi in &st.psi {
            let _ = writeln!(out, "\npsi for {} at beta = {}", psi.component, psi.beta);
            for (v, p) in psi.p.iter().filter(|(_, p)| p.0 != 0.0) {
                let _ = writeln!(out, "  {:<22} {:>18}", v, p.to_string());
            }
        }
    }
    for d in &doc.decompositions {
        let _ = writeln!(out, "\ndecomposition of phi_{} at beta_v = {}  (M = {})", d.vertex, d.beta_v, d.m);
        let _ = writeln!(out, "crit_v: {}", d.crit_v.join(" "));
        let _ = writeln!(out, "support: {}", d.combinatorial_support.join(" "));
        let _ = writeln!(out, "{:<24} {:>18} {:>6}", "component", "lambda", "M_C");
        for (c, l) in &d.lambda {
            let m = d.max_critical.get(c).map_or("-".to_owned(), |m| m.to_string());
            let _ = writeln!(out, "{:<24} {:>18} {:>6}", c, l.to_string(), m);
        }
        if let Some(fr) = &d.lambda_approximate_fractions {
            let _ = writeln!(out, "approximate fractions (denominator <= 1e6, display only):");
            for (c, f) in fr {
                let _ = writeln!(out, "  {:<22} ~ {}", c, f);
            }
        }
        let _ = writeln!(
            out,
            "extrapolation residual {:e} at level {}, |sum lambda - 1| = {:e}",
            d.diagnostics.extrapolation_residual.0, d.diagnostics.extrapolation_level, d.diagnostics.lambda_sum_error.0
        );
    }
    if let Some(o) = &doc.oracle {
        let passed = |xs: &mut dyn Iterator<Item = bool>| {
            let v: Vec<bool> = xs.collect();
            format!("{}/{}", v.iter().filter(|&&p| p).count(), v.len())
        };
        let _ = writeln!(out, "\noracle (truncation N = {})", o.truncation);
        let _ = writeln!(out, "truncated series brackets: {}", passed(&mut o.truncations.iter().map(|t| t.passed)));
        let _ = writeln!(out, "factorization identity:    {}", passed(&mut o.factorizations.iter().map(|t| t.passed)));
        if !o.enumerations.is_empty() {
            let _ = writeln!(out, "path enumeration:          {}", passed(&mut o.enumerations.iter().map(|t| t.passed)));
        }
        for f in &o.failures {
            let _ = writeln!(out, "FAILED: {f}");
        }
        let _ = writeln!(out, "overall: {}", if o.passed { "pass" } else { "FAIL" });
    }
    out
}
