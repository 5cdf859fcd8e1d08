//! Polymers of the quantum cluster expansion and their weights.
//!
//! A polymer is a multiset of edges whose support is connected. Two polymers
//! are compatible iff their supports are vertex disjoint. With normalized
//! traces on the support vertices, the weight of a polymer `gamma` with
//! `n = ||gamma||` and edge enumeration `gamma_1..gamma_n` is
//!
//! ```text
//! w = beta^n / (n! prod_e m(e)!) * sum_{A ⊆ [n]} (-1)^|A| tr[(sum_{i in A} Phi(gamma_i))^n]
//! ```
//!
//! which equals the symmetrized sum `(-beta)^n / (n! prod m!) tr[sum_sigma prod Phi(gamma_sigma(i))]`.
//! Weights are `coefficient * beta^n` with a real coefficient, which lets
//! one table serve every `beta`.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::model::SpinModel;
use crate::operator::{SiteSpace, SparseOperator};
use crate::{Complex, Error, Result};

/// Dense dimension cap for a polymer's support space during weight evaluation.
pub const MAX_WEIGHT_DIM: usize = 1 << 10;

/// Size limit of [`polymer_weight_oracle`] (it sums `n!` products).
pub const ORACLE_MAX_SIZE: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polymer {
    support: Vec<usize>,
    multiplicity: Vec<u32>,
    size: usize,
    vertices: Vec<usize>,
}

impl Polymer {
    /// `support` must be strictly increasing edge indices inducing a connected
    /// subgraph; `multiplicity[i]` belongs to `support[i]`.
    pub fn new(model: &SpinModel, support: Vec<usize>, multiplicity: Vec<u32>) -> Result<Self> {
        if support.is_empty() || support.len() != multiplicity.len() {
            return Err(Error::Domain("polymer needs one multiplicity per support edge".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("polymer support must be strictly increasing".into()));
        }
        if support.iter().any(|&e| e >= model.num_edges()) {
            return Err(Error::Domain("polymer support references a missing edge".into()));
        }
        if multiplicity.contains(&0) {
            return Err(Error::Domain("polymer multiplicities must be positive".into()));
        }
        if !edges_connected(model, &support) {
            return Err(Error::Domain(format!("polymer support {support:?} is not connected")));
        }
        Ok(Self::from_parts(model, support, multiplicity))
    }

    fn from_parts(model: &SpinModel, support: Vec<usize>, multiplicity: Vec<u32>) -> Self {
        let size = multiplicity.iter().map(|&m| m as usize).sum();
        let vertices = support_vertices(model, &support);
        Self {
            support,
            multiplicity,
            size,
            vertices,
        }
    }

    /// Sorted distinct edge indices `E_gamma`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Multiplicities aligned with [`Polymer::support`].
    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    pub fn multiplicity_of(&self, edge: usize) -> u32 {
        self.support
            .binary_search(&edge)
            .map(|i| self.multiplicity[i])
            .unwrap_or(0)
    }

    /// `||gamma||`, the total multiplicity.
    pub fn size(&self) -> usize {
        self.size
    }

    /// `|gamma|`, the number of distinct edges.
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn support_vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// The fixed enumeration `gamma_1..gamma_n`: sorted edges, repeats adjacent.
    pub fn edge_sequence(&self) -> Vec<usize> {
        self.support
            .iter()
            .zip(&self.multiplicity)
            .flat_map(|(&e, &m)| std::iter::repeat_n(e, m as usize))
            .collect()
    }
}

fn support_vertices(model: &SpinModel, support: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = support
        .iter()
        .flat_map(|&e| [model.edges()[e].u, model.edges()[e].v])
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn edges_connected(model: &SpinModel, edges: &[usize]) -> bool {
    let mut reached = vec![false; edges.len()];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        let a = &model.edges()[edges[i]];
        for (j, &f) in edges.iter().enumerate() {
            let b = &model.edges()[f];
            if !reached[j] && (b.touches(a.u) || b.touches(a.v)) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// Polymers are incompatible iff their supports share a vertex. Every
/// polymer is incompatible with itself.
pub fn incompatible(a: &Polymer, b: &Polymer) -> bool {
    let (mut i, mut j) = (0, 0);
    let (x, y) = (&a.vertices, &b.vertices);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Every connected edge set with `1..=max_edges` edges, each once.
///
/// Sets are grown from their smallest edge: the candidate list holds boundary
/// edges above the root, and once a candidate has been tried it is banned in
/// the sibling branches that follow, so every set has exactly one derivation.
/// Output is grouped by smallest edge, in depth-first order within a group;
/// each set is sorted.
pub fn enumerate_connected_edge_sets(model: &SpinModel, max_edges: usize) -> Vec<Vec<usize>> {
    let m = model.num_edges();
    let neighbors: Vec<Vec<usize>> = (0..m)
        .map(|e| {
            let edge = &model.edges()[e];
            let mut nb: Vec<usize> = model
                .incident_edges(edge.u)
                .iter()
                .chain(model.incident_edges(edge.v))
                .copied()
                .filter(|&f| f != e)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    struct Search<'a> {
        neighbors: &'a [Vec<usize>],
        max_edges: usize,
        root: usize,
        in_set: Vec<bool>,
        banned: Vec<bool>,
        current: Vec<usize>,
        out: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn grow(&mut self, candidates: &[usize]) {
            let mut set = self.current.clone();
            set.sort_unstable();
            self.out.push(set);
            if self.current.len() == self.max_edges {
                return;
            }
            for (i, &f) in candidates.iter().enumerate() {
                let mut next = candidates[i + 1..].to_vec();
                for &g in &self.neighbors[f] {
                    if g > self.root && !self.in_set[g] && !self.banned[g] && !next.contains(&g) {
                        next.push(g);
                    }
                }
                self.in_set[f] = true;
                self.current.push(f);
                self.grow(&next);
                self.current.pop();
                self.in_set[f] = false;
                self.banned[f] = true;
            }
            for &f in candidates {
                self.banned[f] = false;
            }
        }
    }

    if max_edges == 0 {
        return Vec::new();
    }
    let mut search = Search {
        neighbors: &neighbors,
        max_edges,
        root: 0,
        in_set: vec![false; m],
        banned: vec![false; m],
        current: Vec::new(),
        out: Vec::new(),
    };
    for root in 0..m {
        search.root = root;
        search.in_set[root] = true;
        search.current.push(root);
        let candidates: Vec<usize> = neighbors[root].iter().copied().filter(|&f| f > root).collect();
        search.grow(&candidates);
        search.current.pop();
        search.in_set[root] = false;
    }
    search.out
}

/// Every polymer with `||gamma|| <= max_size`, each once.
///
/// For each connected edge set with `n` edges (in the order of
/// [`enumerate_connected_edge_sets`]) and each total `k` in `n..=max_size`,
/// the `C(k-1, n-1)` compositions of `k` into `n` positive parts are emitted
/// in lexicographic order.
pub fn enumerate_polymers(model: &SpinModel, max_size: usize) -> Vec<Polymer> {
    let mut out = Vec::new();
    for set in enumerate_connected_edge_sets(model, max_size) {
        for k in set.len()..=max_size {
            for comp in compositions(k, set.len()) {
                out.push(Polymer::from_parts(model, set.clone(), comp));
            }
        }
    }
    out
}

/// Compositions of `total` into `parts` positive integers, lexicographic.
fn compositions(total: usize, parts: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: usize, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            cur.push(remaining as u32);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=remaining - (parts - 1) {
            cur.push(first as u32);
            rec(remaining - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Largest support vertex count whose dense space fits [`MAX_WEIGHT_DIM`].
pub fn max_support_vertices(d: usize) -> usize {
    let mut k = 0;
    while d.pow(k as u32 + 1) <= MAX_WEIGHT_DIM {
        k += 1;
    }
    k
}

fn support_space(model: &SpinModel, edges: &[usize]) -> Result<SiteSpace> {
    let verts = support_vertices(model, edges);
    let cap = max_support_vertices(model.local_dim());
    if verts.len() > cap {
        return Err(Error::Resource(format!(
            "polymer on edges {edges:?} spans {} vertices; weight evaluation is limited to {cap} \
             vertices at d = {} (dense dimension {MAX_WEIGHT_DIM})",
            verts.len(),
            model.local_dim()
        )));
    }
    SiteSpace::new(verts, model.local_dim())
}

/// `tr_norm[M^j]` for `j = 0..=max_power`, `M = sum_i mult_i Phi(edges_i)` on
/// the support space of `edges`. `M` is Hermitian, so the traces are real.
pub(crate) fn power_traces(
    model: &SpinModel,
    edges: &[usize],
    mults: &[u32],
    max_power: usize,
) -> Result<Vec<f64>> {
    let space = support_space(model, edges)?;
    let terms: Vec<_> = edges
        .iter()
        .zip(mults)
        .map(|(&e, &m)| {
            let edge = &model.edges()[e];
            (m as f64, &edge.phi, (edge.u, edge.v))
        })
        .collect();
    let op = SparseOperator::from_edge_terms(&terms, &space)?;
    let dim = op.dim();
    let norm = 1.0 / dim as f64;

    let mut traces = vec![1.0; max_power + 1];
    if max_power == 0 {
        return Ok(traces);
    }
    let first = op.to_dense();
    traces[1] = first.trace().re * norm;
    let mut powers = vec![first.data().to_vec()];
    for _ in 2..=max_power.div_ceil(2) {
        let next = op.mul_dense(powers.last().unwrap());
        powers.push(next);
    }
    // tr(M^a M^b) = sum_ik (M^a)_ik conj((M^b)_ik) for Hermitian M^b.
    for (j, slot) in traces.iter_mut().enumerate().skip(2) {
        let a = j.div_ceil(2);
        let b = j - a;
        let s: f64 = powers[a - 1]
            .iter()
            .zip(&powers[b - 1])
            .map(|(x, y)| (x * y.conj()).re)
            .sum();
        *slot = s * norm;
    }
    Ok(traces)
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

type TraceLookup<'a> = dyn Fn(&[usize], &[u32]) -> Result<std::borrow::Cow<'a, [f64]>> + Sync + 'a;

/// The inclusion-exclusion sum for `gamma`, returning the real coefficient
/// `c` with `w_gamma = c * beta^n`.
///
/// Subsets `A ⊆ [n]` with the same per-edge counts `a_e` give the same
/// operator `sum_e a_e Phi(e)`, so they are summed once with weight
/// `prod_e C(m_e, a_e)`. When the edges with `a_e > 0` split into vertex-disjoint
/// components the operator is a sum of commuting terms on disjoint sites and
/// its normalized power traces combine by the binomial theorem. The empty set
/// contributes nothing.
fn ryser_coefficient(model: &SpinModel, gamma: &Polymer, traces: &TraceLookup<'_>) -> Result<f64> {
    let n = gamma.size;
    let r = gamma.support.len();
    if r > 64 {
        return Err(Error::Resource("polymer support exceeds 64 edges".into()));
    }
    let fact = factorials(n);

    // Adjacency between support edges as bit masks.
    let adj: Vec<u64> = (0..r)
        .map(|i| {
            let a = &model.edges()[gamma.support[i]];
            (0..r).fold(0u64, |mask, j| {
                let b = &model.edges()[gamma.support[j]];
                if i != j && (b.touches(a.u) || b.touches(a.v)) {
                    mask | (1 << j)
                } else {
                    mask
                }
            })
        })
        .collect();

    let mut counts = vec![0u32; r];
    let mut total = 0.0;
    let mut comp_edges = Vec::with_capacity(r);
    let mut comp_mults = Vec::with_capacity(r);
    loop {
        // Advance the mixed-radix counter; stop after the full multiset.
        let mut i = 0;
        while i < r && counts[i] == gamma.multiplicity[i] {
            counts[i] = 0;
            i += 1;
        }
        if i == r {
            break;
        }
        counts[i] += 1;

        let mut active = 0u64;
        let mut selected = 0u32;
        let mut coeff = 1.0;
        for (k, (&c, &m)) in counts.iter().zip(&gamma.multiplicity).enumerate() {
            if c > 0 {
                active |= 1 << k;
            }
            selected += c;
            coeff *= binomial(m, c);
        }
        if selected % 2 == 1 {
            coeff = -coeff;
        }

        // Exponential generating function of the power traces, multiplied
        // over connected components of the active edges.
        let mut egf: Option<Vec<f64>> = None;
        let mut remaining = active;
        while remaining != 0 {
            let mut comp = remaining & remaining.wrapping_neg();
            loop {
                let grown = (0..r)
                    .filter(|&k| comp & (1 << k) != 0)
                    .fold(comp, |acc, k| acc | (adj[k] & active));
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            remaining &= !comp;
            comp_edges.clear();
            comp_mults.clear();
            for k in (0..r).filter(|&k| comp & (1 << k) != 0) {
                comp_edges.push(gamma.support[k]);
                comp_mults.push(counts[k]);
            }
            let t = traces(&comp_edges, &comp_mults)?;
            let series: Vec<f64> = (0..=n).map(|j| t[j] / fact[j]).collect();
            egf = Some(match egf {
                None => series,
                Some(prev) => (0..=n)
                    .map(|j| (0..=j).map(|i| prev[i] * series[j - i]).sum())
                    .collect(),
            });
        }
        let trace_n = egf.expect("active set is non-empty")[n] * fact[n];
        total += coeff * trace_n;
    }

    let denom = fact[n]
        * gamma
            .multiplicity
            .iter()
            .map(|&m| factorials(m as usize)[m as usize])
            .product::<f64>();
    Ok(total / denom)
}

fn beta_power(beta: Complex, n: usize) -> Complex {
    beta.powu(n as u32)
}

/// Weight of a single polymer by the inclusion-exclusion formula.
pub fn polymer_weight(gamma: &Polymer, model: &SpinModel, beta: Complex) -> Result<Complex> {
    Ok(beta_power(beta, gamma.size) * weight_coefficient(gamma, model)?)
}

/// The real `c` with `w_gamma(beta) = c * beta^||gamma||`.
pub fn weight_coefficient(gamma: &Polymer, model: &SpinModel) -> Result<f64> {
    // Support-space check up front so an oversized polymer is named as a whole.
    support_space(model, &gamma.support)?;
    let n = gamma.size;
    let cache = std::sync::Mutex::new(HashMap::<(Vec<usize>, Vec<u32>), Vec<f64>>::new());
    let lookup = |edges: &[usize], mults: &[u32]| -> Result<std::borrow::Cow<'_, [f64]>> {
        let key = (edges.to_vec(), mults.to_vec());
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(std::borrow::Cow::Owned(t.clone()));
        }
        let t = power_traces(model, edges, mults, n)?;
        cache.lock().unwrap().insert(key, t.clone());
        Ok(std::borrow::Cow::Owned(t))
    };
    ryser_coefficient(model, gamma, &lookup)
}

/// Weight by explicit summation over all `n!` orderings of the edge
/// enumeration (`n <= 7`).
pub fn polymer_weight_oracle(gamma: &Polymer, model: &SpinModel, beta: Complex) -> Result<Complex> {
    let n = gamma.size;
    if n > ORACLE_MAX_SIZE {
        return Err(Error::Resource(format!(
            "permutation oracle is limited to polymers of size {ORACLE_MAX_SIZE}, got {n}"
        )));
    }
    let space = support_space(model, &gamma.support)?;
    let dim = space.total_dim();
    let sequence = gamma.edge_sequence();
    let ops = sequence
        .iter()
        .map(|&e| {
            let edge = &model.edges()[e];
            SparseOperator::from_edge_terms(&[(1.0, &edge.phi, (edge.u, edge.v))], &space)
        })
        .collect::<Result<Vec<_>>>()?;

    fn visit(
        ops: &[SparseOperator],
        prefix: &[Complex64],
        used: u32,
        depth: usize,
        dim: usize,
        acc: &mut Complex64,
    ) {
        if depth == ops.len() {
            *acc += (0..dim).map(|i| prefix[i * dim + i]).sum::<Complex64>();
            return;
        }
        for (k, op) in ops.iter().enumerate() {
            if used & (1 << k) == 0 {
                let next = op.dense_mul(prefix);
                visit(ops, &next, used | (1 << k), depth + 1, dim, acc);
            }
        }
    }

    let mut identity = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        identity[i * dim + i] = Complex64::new(1.0, 0.0);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    visit(&ops, &identity, 0, 0, dim, &mut sum);
    let sum = sum / dim as f64;

    let fact = factorials(n);
    let denom = fact[n]
        * gamma
            .multiplicity
            .iter()
            .map(|&m| fact[m as usize])
            .product::<f64>();
    Ok(beta_power(-beta, n) * sum / denom)
}

/// Weight coefficients of a list of polymers, evaluated in parallel.
///
/// Power traces are computed once per polymer in the list and shared by every
/// polymer whose inclusion-exclusion terms reduce to it; lists produced by
/// [`enumerate_polymers`] contain every connected sub-multiset of their
/// members, so no trace is computed twice.
#[derive(Clone, Debug)]
pub struct WeightTable {
    coefficients: Vec<f64>,
    sizes: Vec<usize>,
}

impl WeightTable {
    pub fn build(model: &SpinModel, polymers: &[Polymer]) -> Result<Self> {
        let max_power = polymers.iter().map(Polymer::size).max().unwrap_or(0);
        for p in polymers {
            support_space(model, &p.support)?;
        }
        let traces: Vec<Vec<f64>> = polymers
            .par_iter()
            .map(|p| power_traces(model, &p.support, &p.multiplicity, max_power))
            .collect::<Result<_>>()?;
        let index: HashMap<(&[usize], &[u32]), usize> = polymers
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.support.as_slice(), p.multiplicity.as_slice()), i))
            .collect();
        let lookup = |edges: &[usize], mults: &[u32]| -> Result<std::borrow::Cow<'_, [f64]>> {
            match index.get(&(edges, mults)) {
                Some(&i) => Ok(std::borrow::Cow::Borrowed(traces[i].as_slice())),
                None => {
                    let size = mults.iter().map(|&m| m as usize).sum::<usize>().max(max_power);
                    power_traces(model, edges, mults, size).map(std::borrow::Cow::Owned)
                }
            }
        };
        let coefficients = polymers
            .par_iter()
            .map(|p| ryser_coefficient(model, p, &lookup))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            coefficients,
            sizes: polymers.iter().map(Polymer::size).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        self.coefficients[i]
    }

    pub fn weight(&self, i: usize, beta: Complex) -> Complex {
        beta_power(beta, self.sizes[i]) * self.coefficients[i]
    }
}
