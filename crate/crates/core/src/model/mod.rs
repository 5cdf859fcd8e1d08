//! Spin models: a simple graph with a Hermitian interaction on every edge.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::operator::{operator_norm, OperatorMatrix, HERMITIAN_TOL};
use crate::{Complex, Error, Result};

pub mod preset;

pub use preset::{model_on_graph, preset, random_unit_hermitian, GraphSpec, PresetKind, PresetParams};

/// Slack on `||Phi(e)|| <= 1` absorbing eigensolver rounding.
pub const NORM_TOL: f64 = 1e-9;

/// Relative slack on `|beta| <= 1/(e^4 Delta)` absorbing the rounding of a
/// `beta` given in polar form on the boundary circle.
pub const REGION_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Interaction on `H_u ⊗ H_v`, `u` being the first factor.
    pub phi: OperatorMatrix,
}

impl Edge {
    pub fn touches(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinModel {
    d: usize,
    vertices: Vec<String>,
    edges: Vec<Edge>,
    max_degree: usize,
    beta_rescale: f64,
    incident: Vec<Vec<usize>>,
}

impl SpinModel {
    /// Validates and builds a model. Interactions must be Hermitian with
    /// operator norm at most one.
    pub fn new(d: usize, vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        Self::build(d, vertices, edges, false)
    }

    /// Like [`SpinModel::new`], but if some interaction has norm above one,
    /// every interaction is divided by the largest norm. The divisor is kept
    /// as [`SpinModel::beta_rescale`]: `Z_original(beta) = Z_model(beta * factor)`.
    pub fn new_rescaled(d: usize, vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        Self::build(d, vertices, edges, true)
    }

    fn build(d: usize, vertices: Vec<String>, mut edges: Vec<Edge>, rescale: bool) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidModel(format!("local dimension d = {d} must be >= 2")));
        }
        let mut names = HashSet::new();
        for name in &vertices {
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate vertex '{name}'")));
            }
        }
        let n = vertices.len();
        let mut seen = HashSet::new();
        let mut norms = Vec::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            let label = || edge_label(&vertices, k, e);
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidModel(format!(
                    "edge {k} references a vertex index outside 0..{n}"
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidModel(format!("{} is a self-loop", label())));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidModel(format!("{} is a duplicate edge", label())));
            }
            if e.phi.dim() != d * d {
                return Err(Error::InvalidModel(format!(
                    "{}: interaction has dimension {}, expected d^2 = {}",
                    label(),
                    e.phi.dim(),
                    d * d
                )));
            }
            let defect = e.phi.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::InvalidModel(format!(
                    "{}: interaction is not Hermitian (max |Phi - Phi^dagger| = {defect:e})",
                    label()
                )));
            }
            norms.push(operator_norm(&e.phi)?);
        }

        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        let mut beta_rescale = 1.0;
        if max_norm > 1.0 + NORM_TOL {
            if !rescale {
                let k = norms.iter().position(|&x| x == max_norm).unwrap();
                return Err(Error::InvalidModel(format!(
                    "{}: interaction norm {max_norm} exceeds 1 (set \"rescale\": true to divide all interactions by it)",
                    edge_label(&vertices, k, &edges[k])
                )));
            }
            beta_rescale = max_norm;
            for e in &mut edges {
                e.phi = e.phi.scale(1.0 / max_norm);
            }
        }

        let mut incident = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            incident[e.u].push(k);
            incident[e.v].push(k);
        }
        let max_degree = incident.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            d,
            vertices,
            edges,
            max_degree,
            beta_rescale,
            incident,
        })
    }

    pub(crate) fn with_beta_rescale(mut self, factor: f64) -> Self {
        self.beta_rescale = factor;
        self
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Factor by which the document's interactions were divided on load.
    pub fn beta_rescale(&self) -> f64 {
        self.beta_rescale
    }

    /// Indices of the edges containing vertex `x`, ascending.
    pub fn incident_edges(&self, x: usize) -> &[usize] {
        &self.incident[x]
    }

    /// `|X| log d`, the log of the unnormalized trace of the identity.
    pub fn log_trace_identity(&self) -> f64 {
        self.num_vertices() as f64 * (self.d as f64).ln()
    }
}

fn edge_label(vertices: &[String], k: usize, e: &Edge) -> String {
    let name = |i: usize| vertices.get(i).map(String::as_str).unwrap_or("?");
    format!("edge {k} ({}, {})", name(e.u), name(e.v))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub u: String,
    pub v: String,
    pub phi: MatrixDocument,
}

/// Interchange form of a model.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub d: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDocument>,
    #[serde(default)]
    pub rescale: bool,
    /// Written by [`emit_model`] for models that were rescaled on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_rescale: Option<f64>,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<SpinModel> {
        let index: HashMap<&str, usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| {
                    Error::InvalidModel(format!("edge {k} references unknown vertex '{name}'"))
                })
            };
            let (u, v) = (lookup(&e.u)?, lookup(&e.v)?);
            let m = &e.phi;
            let shape_ok = m.re.len() == m.dim
                && m.im.len() == m.dim
                && m.re.iter().chain(&m.im).all(|row| row.len() == m.dim);
            if !shape_ok || m.dim == 0 {
                return Err(Error::InvalidModel(format!(
                    "edge {k} ({}, {}): phi must carry dim x dim arrays re/im with dim = {}",
                    e.u, e.v, m.dim
                )));
            }
            let phi = OperatorMatrix::from_parts(&m.re, &m.im)
                .map_err(|err| Error::InvalidModel(format!("edge {k}: {err}")))?;
            edges.push(Edge { u, v, phi });
        }
        let model = if self.rescale {
            SpinModel::new_rescaled(self.d, self.vertices, edges)?
        } else {
            SpinModel::new(self.d, self.vertices, edges)?
        };
        Ok(match self.beta_rescale {
            Some(f) if model.beta_rescale == 1.0 => model.with_beta_rescale(f),
            _ => model,
        })
    }
}

impl From<&SpinModel> for ModelDocument {
    fn from(m: &SpinModel) -> Self {
        ModelDocument {
            d: m.d,
            vertices: m.vertices.clone(),
            edges: m
                .edges
                .iter()
                .map(|e| EdgeDocument {
                    u: m.vertices[e.u].clone(),
                    v: m.vertices[e.v].clone(),
                    phi: MatrixDocument {
                        dim: e.phi.dim(),
                        re: e.phi.real_part(),
                        im: e.phi.imag_part(),
                    },
                })
                .collect(),
            rescale: false,
            beta_rescale: (m.beta_rescale != 1.0).then_some(m.beta_rescale),
        }
    }
}

/// Parses and validates a JSON model document.
pub fn load_model(document: &str) -> Result<SpinModel> {
    let doc: ModelDocument = serde_json::from_str(document)
        .map_err(|e| Error::InvalidModel(format!("schema violation: {e}")))?;
    doc.into_model()
}

pub fn emit_model(model: &SpinModel) -> String {
    serde_json::to_string_pretty(&ModelDocument::from(model))
        .expect("model documents always serialize")
}

/// `1 / (e^4 Delta)`.
pub fn convergence_radius(max_degree: usize) -> f64 {
    (-4.0_f64).exp() / max_degree as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSpec {
    pub value: Complex,
    pub radius_bound: f64,
    pub in_region: bool,
}

/// Checks `beta` against the convergence region of `model`.
pub fn validate_beta(model: &SpinModel, beta: Complex) -> Result<BetaSpec> {
    if model.max_degree() == 0 {
        return Err(Error::Edgeless);
    }
    let radius_bound = convergence_radius(model.max_degree());
    Ok(BetaSpec {
        value: beta,
        radius_bound,
        in_region: beta.norm() <= radius_bound * (1.0 + REGION_SLACK),
    })
}
