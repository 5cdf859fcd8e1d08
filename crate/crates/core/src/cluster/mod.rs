//! Clusters of polymers and the truncated expansion `T_m`.
//!
//! A cluster is a multiset of polymers whose incompatibility graph is
//! connected. With `||Gamma||` the summed polymer sizes,
//!
//! ```text
//! T_m(beta) = sum_{||Gamma|| < m} phi(H_Gamma) prod_{gamma in Gamma} w_gamma(beta)
//! ```
//!
//! summed over ordered tuples. Grouping tuples by their multiset turns the
//! ordering count `n! / prod k!` and `phi = c(V) / n!` into `c(V) / prod k!`.

mod activity;
mod ursell;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rayon::prelude::*;

use crate::model::{validate_beta, SpinModel};
use crate::polymer::{enumerate_polymers, incompatible, Polymer, WeightTable};
use crate::{Complex, Error, Result};

pub use activity::{connected_vertex_sets, grouped_activities, Activity};
pub use ursell::{
    ursell_bruteforce, ursell_fast, IncompatibilityGraph, UrsellValue, BRUTEFORCE_MAX_EDGES,
    BRUTEFORCE_MAX_VERTICES, FAST_MAX_VERTICES,
};

/// A multiset of polymers, stored as sorted indices into a polymer list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cluster {
    occurrences: Vec<u32>,
    total_size: usize,
}

impl Cluster {
    pub fn new(polymers: &[Polymer], mut occurrences: Vec<u32>) -> Self {
        occurrences.sort_unstable();
        let total_size = occurrences
            .iter()
            .map(|&i| polymers[i as usize].size())
            .sum();
        Self {
            occurrences,
            total_size,
        }
    }

    /// Polymer indices in non-decreasing order, repeated by multiplicity.
    pub fn occurrences(&self) -> &[u32] {
        &self.occurrences
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    /// `||Gamma||`.
    pub fn total_size(&self) -> usize {
        self.total_size
    }

    /// Distinct polymers with their multiplicities `k_gamma`.
    pub fn counts(&self) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        for &i in &self.occurrences {
            match out.last_mut() {
                Some((j, k)) if *j == i => *k += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    /// Incompatibility graph on the occurrences; repeated polymers are adjacent.
    pub fn incompatibility_graph(&self, polymers: &[Polymer]) -> IncompatibilityGraph {
        IncompatibilityGraph::from_adjacency(adjacency_rows(polymers, &self.occurrences))
    }

    pub fn is_connected(&self, polymers: &[Polymer]) -> bool {
        !self.is_empty() && self.incompatibility_graph(polymers).is_connected()
    }
}

/// Number of distinct orderings `n! / prod k_gamma!` of a cluster.
pub fn ordering_multiplicity(cluster: &Cluster) -> u128 {
    // Product of binomials keeps intermediates small.
    let mut placed = 0u128;
    let mut total = 1u128;
    for (_, k) in cluster.counts() {
        for i in 1..=k as u128 {
            placed += 1;
            total = total * placed / i;
        }
    }
    total
}

fn adjacency_rows(polymers: &[Polymer], occ: &[u32]) -> Vec<u64> {
    let n = occ.len();
    let mut adj = vec![0u64; n];
    for i in 0..n {
        for j in i + 1..n {
            if incompatible(&polymers[occ[i] as usize], &polymers[occ[j] as usize]) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

/// Something a cluster can be built from: a sorted vertex set and the
/// size it adds to `||Gamma||`.
struct Element<'a> {
    vertices: &'a [usize],
    degree: usize,
}

/// Reverse search over clusters. The parent of a cluster drops its largest
/// sorted position whose removal leaves the rest connected; single elements
/// are the roots, so every cluster is reached exactly once.
struct ClusterSearch<'a> {
    elements: Vec<Element<'a>>,
    /// Sorted indices of the elements incompatible with each element,
    /// itself included.
    conflicts: Vec<Vec<u32>>,
    budget: usize,
}

type Visitor<'v> = dyn FnMut(&[u32], u32, usize, &[u64]) + 'v;

impl<'a> ClusterSearch<'a> {
    fn new(elements: Vec<Element<'a>>, budget: usize) -> Self {
        let n_vertices = elements
            .iter()
            .flat_map(|e| e.vertices.iter().copied())
            .max()
            .map_or(0, |v| v + 1);
        let mut touching = vec![Vec::new(); n_vertices];
        for (i, e) in elements.iter().enumerate() {
            if e.degree <= budget {
                for &x in e.vertices {
                    touching[x].push(i as u32);
                }
            }
        }
        let conflicts = elements
            .iter()
            .map(|e| {
                let mut c: Vec<u32> = e
                    .vertices
                    .iter()
                    .flat_map(|&x| touching[x].iter().copied())
                    .collect();
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        Self {
            elements,
            conflicts,
            budget,
        }
    }

    fn for_polymers(polymers: &'a [Polymer], budget: usize) -> Self {
        let elements = polymers
            .iter()
            .map(|p| Element {
                vertices: p.support_vertices(),
                degree: p.size(),
            })
            .collect();
        Self::new(elements, budget)
    }

    fn roots(&self) -> Vec<u32> {
        (0..self.elements.len() as u32)
            .filter(|&i| self.elements[i as usize].degree <= self.budget)
            .collect()
    }

    /// Calls `visit(occurrences, added, size, adjacency)` for every cluster in
    /// the subtree of `root`, parents before children. `added` is the element
    /// that turned the parent into this cluster.
    fn visit_root(&self, root: u32, visit: &mut Visitor<'_>) {
        let mut occ = vec![root];
        let size = self.elements[root as usize].degree;
        self.grow(&mut occ, root, size, &[0], visit);
    }

    fn grow(&self, occ: &mut Vec<u32>, added: u32, size: usize, adj: &[u64], visit: &mut Visitor<'_>) {
        visit(occ, added, size, adj);
        let remaining = self.budget - size;
        if remaining == 0 || occ.len() == 64 {
            return;
        }
        let mut candidates: Vec<u32> = Vec::new();
        for (k, &i) in occ.iter().enumerate() {
            if k > 0 && occ[k - 1] == i {
                continue;
            }
            candidates.extend(
                self.conflicts[i as usize]
                    .iter()
                    .copied()
                    .filter(|&q| self.elements[q as usize].degree <= remaining),
            );
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut child_adj = Vec::with_capacity(occ.len() + 1);
        for q in candidates {
            let pos = occ.partition_point(|&i| i <= q);
            self.insert_row(occ, adj, q, pos, &mut child_adj);
            occ.insert(pos, q);
            if is_canonical_child(occ, &child_adj, q) {
                let child_size = size + self.elements[q as usize].degree;
                self.grow(occ, q, child_size, &child_adj, visit);
            }
            occ.remove(pos);
        }
    }

    /// Adjacency of `occ` with `q` inserted at `pos`, from the parent rows.
    fn insert_row(&self, occ: &[u32], adj: &[u64], q: u32, pos: usize, out: &mut Vec<u64>) {
        out.clear();
        let low = (1u64 << pos) - 1;
        let conflicts = &self.conflicts[q as usize];
        let mut row_q = 0u64;
        for (i, (&p, &row)) in occ.iter().zip(adj).enumerate() {
            let j = if i < pos { i } else { i + 1 };
            let hit = conflicts.binary_search(&p).is_ok();
            if hit {
                row_q |= 1 << j;
            }
            out.push((row & low) | ((row & !low) << 1) | ((hit as u64) << pos));
        }
        out.insert(pos, row_q);
    }
}

/// Largest position whose removal keeps the incompatibility graph connected.
fn canonical_removal(adj: &[u64]) -> Option<usize> {
    let n = adj.len();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    (0..n).rev().find(|&p| ursell::spans(adj, full & !(1u64 << p)))
}

/// Whether removing the canonical position gives back the parent. Copies of
/// `q` are interchangeable, so the position only has to hold a copy of `q`.
fn is_canonical_child(occ: &[u32], adj: &[u64], q: u32) -> bool {
    canonical_removal(adj).is_some_and(|p| occ[p] == q)
}

/// All clusters with `||Gamma|| < max_total`, in canonical order: grouped by
/// their root polymer, depth first within a group.
pub fn enumerate_clusters(polymers: &[Polymer], max_total: usize) -> Vec<Cluster> {
    if max_total <= 1 {
        return Vec::new();
    }
    let search = ClusterSearch::for_polymers(polymers, max_total - 1);
    let groups: Vec<Vec<Cluster>> = search
        .roots()
        .into_par_iter()
        .map(|root| {
            let mut out = Vec::new();
            search.visit_root(root, &mut |occ, _, size, _| {
                out.push(Cluster {
                    occurrences: occ.to_vec(),
                    total_size: size,
                })
            });
            out
        })
        .collect();
    groups.into_iter().flatten().collect()
}

/// Incompatibility graph of the distinct elements of a cluster followed by
/// their multiplicities: the data the Ursell factor depends on.
fn quotient_key(occ: &[u32], adj: &[u64]) -> Vec<u64> {
    let firsts: Vec<usize> = (0..occ.len())
        .filter(|&k| k == 0 || occ[k - 1] != occ[k])
        .collect();
    let r = firsts.len();
    let mut key = Vec::with_capacity(2 * r);
    for &a in &firsts {
        let row = firsts
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b != a && adj[a] & (1 << b) != 0)
            .fold(0u64, |m, (j, _)| m | (1 << j));
        key.push(row);
    }
    for (j, &a) in firsts.iter().enumerate() {
        let end = firsts.get(j + 1).copied().unwrap_or(occ.len());
        key.push((end - a) as u64);
    }
    key
}

/// Sums `c(V) / prod k! * prod activity` over all clusters of `search`,
/// truncated below degree `order`. Each root is summed on its own and the
/// per-root sums are added in root order, so the result does not depend on
/// the number of worker threads.
fn sum_clusters(
    search: &ClusterSearch<'_>,
    activities: &[Vec<f64>],
    order: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let per_root: Vec<(Vec<f64>, Vec<usize>)> = search
        .roots()
        .into_par_iter()
        .map_init(HashMap::<Vec<u64>, f64>::new, |cache, root| {
            let mut sums = vec![0.0; order];
            let mut counts = vec![0usize; order];
            // products[k] = prod of activities of the first k + 1 elements
            // added along the current search path.
            let mut products: Vec<Vec<f64>> = Vec::new();
            let mut failure = None;
            search.visit_root(root, &mut |occ, added, size, adj| {
                let depth = occ.len();
                products.truncate(depth - 1);
                let next = match products.last() {
                    None => activities[added as usize].clone(),
                    Some(prev) => {
                        let mut out = vec![0.0; order];
                        activity::mul_truncated(prev, &activities[added as usize], &mut out);
                        out
                    }
                };
                products.push(next);
                counts[size] += 1;
                let key = quotient_key(occ, adj);
                let factor = match cache.get(&key) {
                    Some(&f) => f,
                    None => {
                        let r = key.len() / 2;
                        let counts = &key[r..];
                        match ursell::connected_signed_count(adj) {
                            Ok(c) => {
                                let denom: i128 = counts
                                    .iter()
                                    .map(|&k| (1..=k as i128).product::<i128>())
                                    .product();
                                let f = ratio_to_f64(Ratio::new(c, denom));
                                cache.insert(key, f);
                                f
                            }
                            Err(e) => {
                                failure.get_or_insert(e);
                                return;
                            }
                        }
                    }
                };
                if factor == 0.0 {
                    return;
                }
                for (s, &p) in sums.iter_mut().zip(&products[depth - 1]) {
                    *s += factor * p;
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok((sums, counts)),
            }
        })
        .collect::<Result<_>>()?;
    let mut coefficients = vec![0.0; order];
    let mut counts = vec![0; order];
    for (s, c) in per_root {
        for k in 0..order {
            coefficients[k] += s[k];
            counts[k] += c[k];
        }
    }
    Ok((coefficients, counts))
}

/// Smallest `m` with `|V| e^{-m} <= log(1 + epsilon)`, which bounds the
/// relative error of `exp(T_m)` by `epsilon`; for `epsilon >= 1` the target
/// is tightened to `min(epsilon / 2, log(1 + epsilon))`.
pub fn choose_truncation_order(num_vertices: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if num_vertices == 0 {
        return Err(Error::Domain("model has no vertices".into()));
    }
    let target = if epsilon < 1.0 {
        epsilon.ln_1p()
    } else {
        (epsilon / 2.0).min(epsilon.ln_1p())
    };
    let m = (num_vertices as f64 / target).ln().ceil();
    Ok(m.max(1.0) as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub polymers: usize,
    pub clusters: usize,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionResult {
    pub t_m: Complex,
    pub order: usize,
    /// `|V| e^{-m}`; only a bound when `rigorous` holds.
    pub apriori_error: f64,
    /// `|V| log d + T_m`.
    pub log_z: Complex,
    /// Whether `beta` lies in the region where the tail bound is proved.
    pub rigorous: bool,
    pub diagnostics: Diagnostics,
}

/// Clusters summed into polynomial coefficients: `T_m(beta) = sum_k a_k beta^k`
/// for `k < m`. Building is independent of `beta`.
#[derive(Clone, Debug)]
pub struct ClusterExpansion {
    order: usize,
    num_vertices: usize,
    log_trace_identity: f64,
    region_radius: Option<f64>,
    coefficients: Vec<f64>,
    clusters_by_degree: Vec<usize>,
    polymers: usize,
    build_time: Duration,
}

impl ClusterExpansion {
    /// Sums clusters of grouped activities: polymers sharing a support vertex
    /// set are merged before clusters are formed. Clusters are then multisets
    /// of vertex sets, and their count no longer grows with the number of
    /// multiplicity patterns on each set.
    pub fn build(model: &SpinModel, order: usize) -> Result<Self> {
        Self::build_with(model, order, |model, order| {
            let activities = activity::grouped_activities(model, order)?;
            let count = activities.len();
            let (vertices, polys): (Vec<_>, Vec<_>) = activities
                .into_iter()
                .map(|a| (a.vertices, a.coefficients))
                .unzip();
            let elements = vertices
                .iter()
                .map(|v| Element {
                    vertices: v,
                    degree: v.len() - 1,
                })
                .collect();
            let search = ClusterSearch::new(elements, order - 1);
            let (coefficients, counts) = sum_clusters(&search, &polys, order)?;
            Ok((coefficients, counts, count))
        })
    }

    /// The same expansion summed over clusters of individual polymers, each
    /// weighted by [`WeightTable`]. Far slower than [`ClusterExpansion::build`];
    /// kept as a reference.
    pub fn build_ungrouped(model: &SpinModel, order: usize) -> Result<Self> {
        Self::build_with(model, order, |model, order| {
            let polymers = enumerate_polymers(model, order - 1);
            let weights = WeightTable::build(model, &polymers)?;
            let polys: Vec<Vec<f64>> = polymers
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut c = vec![0.0; order];
                    c[p.size()] = weights.coefficient(i);
                    c
                })
                .collect();
            let search = ClusterSearch::for_polymers(&polymers, order - 1);
            let (coefficients, counts) = sum_clusters(&search, &polys, order)?;
            Ok((coefficients, counts, polymers.len()))
        })
    }

    fn build_with(
        model: &SpinModel,
        order: usize,
        sum: impl FnOnce(&SpinModel, usize) -> Result<(Vec<f64>, Vec<usize>, usize)>,
    ) -> Result<Self> {
        let start = Instant::now();
        let (coefficients, clusters_by_degree, polymers) = if order > 1 && model.num_edges() > 0 {
            if order - 1 > FAST_MAX_VERTICES {
                return Err(Error::Resource(format!(
                    "truncation order {order} exceeds the supported maximum {}",
                    FAST_MAX_VERTICES + 1
                )));
            }
            sum(model, order)?
        } else {
            (vec![0.0; order.max(1)], vec![0; order.max(1)], 0)
        };
        let region_radius = validate_beta(model, Complex::new(0.0, 0.0))
            .ok()
            .map(|s| s.radius_bound);
        Ok(Self {
            order,
            num_vertices: model.num_vertices(),
            log_trace_identity: model.log_trace_identity(),
            region_radius,
            coefficients,
            clusters_by_degree,
            polymers,
            build_time: start.elapsed(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `a_k` for `k = 0..m`; `a_0` and `a_1` are always zero.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Number of clusters of each total size.
    pub fn clusters_by_degree(&self) -> &[usize] {
        &self.clusters_by_degree
    }

    pub fn polymer_count(&self) -> usize {
        self.polymers
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters_by_degree.iter().sum()
    }

    pub fn evaluate(&self, beta: Complex) -> ExpansionResult {
        self.evaluate_at_order(beta, self.order)
    }

    /// `T_{m'}` for any `m' <= m`, reusing the clusters of this expansion.
    pub fn evaluate_at_order(&self, beta: Complex, order: usize) -> ExpansionResult {
        assert!(order <= self.order, "order {order} exceeds the built order {}", self.order);
        let start = Instant::now();
        let mut t_m = Complex::new(0.0, 0.0);
        for &a in self.coefficients[..order.max(1).min(self.coefficients.len())].iter().rev() {
            t_m = t_m * beta + a;
        }
        if order == 0 {
            t_m = Complex::new(0.0, 0.0);
        }
        let rigorous = match self.region_radius {
            Some(r) => beta.norm() <= r * (1.0 + crate::model::REGION_SLACK),
            None => true,
        };
        ExpansionResult {
            t_m,
            order,
            apriori_error: self.num_vertices as f64 * (-(order as f64)).exp(),
            log_z: t_m + self.log_trace_identity,
            rigorous,
            diagnostics: Diagnostics {
                polymers: self.polymers,
                clusters: self.clusters_by_degree[..order.max(1).min(self.order.max(1))]
                    .iter()
                    .sum(),
                wall_time: self.build_time + start.elapsed(),
            },
        }
    }
}

fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `T_m(beta)` without any region check.
pub fn truncated_expansion(model: &SpinModel, beta: Complex, order: usize) -> Result<ExpansionResult> {
    Ok(ClusterExpansion::build(model, order)?.evaluate(beta))
}

/// `T_m` with `m` chosen from `epsilon`. Outside the convergence region the
/// call fails unless `force_region` is set, in which case the result is
/// flagged non-rigorous.
pub fn estimate(
    model: &SpinModel,
    beta: Complex,
    epsilon: f64,
    force_region: bool,
) -> Result<ExpansionResult> {
    let order = choose_truncation_order(model.num_vertices(), epsilon)?;
    estimate_at_order(model, beta, order, force_region)
}

/// Like [`estimate`] with an explicit truncation order.
pub fn estimate_at_order(
    model: &SpinModel,
    beta: Complex,
    order: usize,
    force_region: bool,
) -> Result<ExpansionResult> {
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::Domain(format!("beta must be finite, got {beta}")));
    }
    if model.num_edges() > 0 {
        let spec = validate_beta(model, beta)?;
        if !spec.in_region && !force_region {
            return Err(Error::OutsideRegion {
                modulus: beta.norm(),
                bound: spec.radius_bound,
                max_degree: model.max_degree(),
            });
        }
    }
    truncated_expansion(model, beta, order)
}
