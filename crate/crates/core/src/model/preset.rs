//! Reproducible test instances: standard edge terms on standard graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Edge, SpinModel};
use crate::operator::{operator_norm, OperatorMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    /// `J Z⊗Z + (h/2)(X⊗I + I⊗X)`; parameters `J` (default 1), `h` (default 1).
    Tfim,
    /// `J (X⊗X + Y⊗Y + jz Z⊗Z)`; parameters `J` (default 1), `jz` (default 0.5).
    Xxz,
    /// Independent Gaussian Hermitian term per edge, normalized to norm 1;
    /// parameter `d` (default 2).
    RandomHermitian,
}

impl PresetKind {
    pub const ALL: [PresetKind; 3] = [Self::Tfim, Self::Xxz, Self::RandomHermitian];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tfim => "tfim",
            Self::Xxz => "xxz",
            Self::RandomHermitian => "random_hermitian",
        }
    }

    pub fn parameters(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::Tfim => &[("J", 1.0), ("h", 1.0)],
            Self::Xxz => &[("J", 1.0), ("jz", 0.5)],
            Self::RandomHermitian => &[("d", 2.0)],
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidModel(format!("unknown preset '{s}'")))
    }
}

/// Graph families, written `path:N`, `cycle:N`, `grid:RxC`, `random_regular:N:K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    Path(usize),
    Cycle(usize),
    Grid(usize, usize),
    RandomRegular { n: usize, k: usize },
}

impl GraphSpec {
    pub const FORMS: [&'static str; 4] = ["path:N", "cycle:N", "grid:RxC", "random_regular:N:K"];

    /// Vertex count and edge list; `seed` only matters for random graphs.
    pub fn build(self, seed: u64) -> Result<(usize, Vec<(usize, usize)>)> {
        let invalid = |msg: String| Err(Error::InvalidModel(msg));
        match self {
            Self::Path(n) => {
                if n < 1 {
                    return invalid("path needs at least 1 vertex".into());
                }
                Ok((n, (1..n).map(|i| (i - 1, i)).collect()))
            }
            Self::Cycle(n) => {
                if n < 3 {
                    return invalid(format!("cycle needs at least 3 vertices, got {n}"));
                }
                let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
                edges.push((0, n - 1));
                Ok((n, edges))
            }
            Self::Grid(r, c) => {
                if r < 1 || c < 1 {
                    return invalid(format!("grid dimensions {r}x{c} must be positive"));
                }
                let mut edges = Vec::new();
                for i in 0..r {
                    for j in 0..c {
                        let v = i * c + j;
                        if j + 1 < c {
                            edges.push((v, v + 1));
                        }
                        if i + 1 < r {
                            edges.push((v, v + c));
                        }
                    }
                }
                Ok((r * c, edges))
            }
            Self::RandomRegular { n, k } => {
                if k == 0 || k >= n || (n * k) % 2 != 0 {
                    return invalid(format!(
                        "no simple {k}-regular graph on {n} vertices (need 0 < k < n, n*k even)"
                    ));
                }
                random_regular(n, k, seed).map(|e| (n, e))
            }
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Path(n) => write!(f, "path:{n}"),
            Self::Cycle(n) => write!(f, "cycle:{n}"),
            Self::Grid(r, c) => write!(f, "grid:{r}x{c}"),
            Self::RandomRegular { n, k } => write!(f, "random_regular:{n}:{k}"),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidModel(format!(
                "cannot parse graph '{s}'; expected one of {}",
                Self::FORMS.join(", ")
            ))
        };
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "path" => Ok(Self::Path(num(rest)?)),
            "cycle" => Ok(Self::Cycle(num(rest)?)),
            "grid" => {
                let (r, c) = rest.split_once('x').ok_or_else(bad)?;
                Ok(Self::Grid(num(r)?, num(c)?))
            }
            "random_regular" => {
                let (n, k) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Self::RandomRegular { n: num(n)?, k: num(k)? })
            }
            _ => Err(bad()),
        }
    }
}

/// Named real parameters plus the seed for random components.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetParams {
    pub values: BTreeMap<String, f64>,
    pub seed: u64,
}

impl PresetParams {
    pub fn new(seed: u64) -> Self {
        Self {
            values: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    fn resolve(&self, kind: PresetKind) -> Result<BTreeMap<&'static str, f64>> {
        let known = kind.parameters();
        if let Some(k) = self.values.keys().find(|k| !known.iter().any(|(n, _)| n == k)) {
            return Err(Error::InvalidModel(format!(
                "preset {kind} has no parameter '{k}' (known: {})",
                known.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            )));
        }
        let mut out = BTreeMap::new();
        for &(name, default) in known {
            let v = self.values.get(name).copied().unwrap_or(default);
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("parameter {name} = {v} is not finite")));
            }
            out.insert(name, v);
        }
        Ok(out)
    }
}

/// Builds a preset model. Deterministic in `(kind, graph, params)`.
pub fn preset(kind: PresetKind, graph: GraphSpec, params: &PresetParams) -> Result<SpinModel> {
    let (n, edges) = graph.build(params.seed)?;
    model_on_graph(kind, n, &edges, params)
}

/// Builds a preset edge term on an arbitrary simple graph with vertices `0..n`.
pub fn model_on_graph(
    kind: PresetKind,
    n: usize,
    edges: &[(usize, usize)],
    params: &PresetParams,
) -> Result<SpinModel> {
    let p = params.resolve(kind)?;
    let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    match kind {
        PresetKind::Tfim | PresetKind::Xxz => {
            let term = if kind == PresetKind::Tfim {
                tfim_term(p["J"], p["h"])
            } else {
                xxz_term(p["J"], p["jz"])
            };
            let norm = operator_norm(&term)?;
            let (term, factor) = if norm > 1.0 { (term.scale(1.0 / norm), norm) } else { (term, 1.0) };
            let edges = edges
                .iter()
                .map(|&(u, v)| Edge { u, v, phi: term.clone() })
                .collect();
            Ok(SpinModel::new(2, names, edges)?.with_beta_rescale(factor))
        }
        PresetKind::RandomHermitian => {
            let d = p["d"];
            if d.fract() != 0.0 || !(2.0..=8.0).contains(&d) {
                return Err(Error::InvalidModel(format!("d = {d} must be an integer in 2..=8")));
            }
            let d = d as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(1);
            let edges = edges
                .iter()
                .map(|&(u, v)| {
                    Ok(Edge {
                        u,
                        v,
                        phi: random_unit_hermitian(d * d, &mut rng)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SpinModel::new(d, names, edges)
        }
    }
}

fn tfim_term(j: f64, h: f64) -> OperatorMatrix {
    let (x, z, id) = (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_z(), OperatorMatrix::identity(2));
    let field = &x.kron(&id) + &id.kron(&x);
    &z.kron(&z).scale(j) + &field.scale(h / 2.0)
}

fn xxz_term(j: f64, jz: f64) -> OperatorMatrix {
    let (x, y, z) = (OperatorMatrix::pauli_x(), OperatorMatrix::pauli_y(), OperatorMatrix::pauli_z());
    let xy = &x.kron(&x) + &y.kron(&y);
    (&xy + &z.kron(&z).scale(jz)).scale(j)
}

/// Gaussian Hermitian matrix divided by its operator norm.
pub fn random_unit_hermitian(dim: usize, rng: &mut impl Rng) -> Result<OperatorMatrix> {
    let mut m = OperatorMatrix::zeros(dim);
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };
    for i in 0..dim {
        m.set(i, i, Complex64::new(gauss(), 0.0));
        for j in i + 1..dim {
            let z = Complex64::new(gauss(), gauss());
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    let norm = operator_norm(&m)?;
    if norm == 0.0 {
        return Err(Error::Numeric("sampled a zero interaction".into()));
    }
    Ok(m.scale(1.0 / norm))
}

/// Uniform pairing model with rejection of loops and multi-edges.
fn random_regular(n: usize, k: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    for _ in 0..10_000 {
        stubs.shuffle(&mut rng);
        let mut set = BTreeSet::new();
        let ok = stubs.chunks(2).all(|p| {
            let (a, b) = (p[0].min(p[1]), p[0].max(p[1]));
            a != b && set.insert((a, b))
        });
        if ok {
            return Ok(set.into_iter().collect());
        }
    }
    Err(Error::Resource(format!(
        "failed to sample a simple {k}-regular graph on {n} vertices"
    )))
}
