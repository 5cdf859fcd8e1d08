//! Polymer weights summed over a common support vertex set.
//!
//! Incompatibility only sees the vertex set `V(gamma)`, so every polymer with
//! `V(gamma) = U` can be merged into one activity
//! `W_U(beta) = sum_{V(gamma) = U} w_gamma(beta)`, a polynomial whose lowest
//! possible degree is `|U| - 1`. Writing `Z_U = tr_norm exp(-beta H[U])` for the
//! induced subsystem, the polymer representation reads
//! `Z_U = sum_{disjoint U_1, .., U_k ⊆ U} prod_i W_{U_i}`, and peeling off the
//! block that holds `min U` gives
//!
//! ```text
//! W_U = Z_U - Z_{U \ min U} - sum_{min U ∈ B ⊊ U, |B| >= 2} W_B Z_{U \ B}
//! ```
//!
//! with `Z` of a disconnected set the product over its components.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::model::SpinModel;
use crate::polymer::power_traces;
use crate::Result;

/// Summed activity of the polymers supported on `vertices`, as coefficients
/// of `beta^k` for `k < order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Activity {
    pub vertices: Vec<usize>,
    pub coefficients: Vec<f64>,
}

/// Vertex sets of size `2..=max_size` inducing a connected subgraph, ordered
/// by size then lexicographically.
pub fn connected_vertex_sets(model: &SpinModel, max_size: usize) -> Vec<Vec<usize>> {
    let neighbors = neighbor_lists(model);
    let mut out = Vec::new();
    let mut level: BTreeSet<Vec<usize>> = model
        .edges()
        .iter()
        .map(|e| if e.u < e.v { vec![e.u, e.v] } else { vec![e.v, e.u] })
        .collect();
    let mut size = 2;
    while size <= max_size && !level.is_empty() {
        let mut next = BTreeSet::new();
        if size < max_size {
            for set in &level {
                for &x in set {
                    for &y in &neighbors[x] {
                        if let Err(pos) = set.binary_search(&y) {
                            let mut grown = set.clone();
                            grown.insert(pos, y);
                            next.insert(grown);
                        }
                    }
                }
            }
        }
        out.extend(std::mem::replace(&mut level, next));
        size += 1;
    }
    out
}

fn neighbor_lists(model: &SpinModel) -> Vec<Vec<usize>> {
    let mut n = vec![Vec::new(); model.num_vertices()];
    for e in model.edges() {
        n[e.u].push(e.v);
        n[e.v].push(e.u);
    }
    n
}

pub(crate) fn mul_truncated(a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(out.len() - i) {
            out[i + j] += x * y;
        }
    }
}

/// Activities of every connected vertex set `U` with `|U| - 1 < order`.
pub fn grouped_activities(model: &SpinModel, order: usize) -> Result<Vec<Activity>> {
    if order <= 1 {
        return Ok(Vec::new());
    }
    let sets = connected_vertex_sets(model, order);
    let max_power = order - 1;

    // Z_U truncated at degree < order, from the power traces of H[U].
    let partition: Vec<Vec<f64>> = sets
        .par_iter()
        .map(|set| {
            let edges: Vec<usize> = (0..model.num_edges())
                .filter(|&e| {
                    let edge = &model.edges()[e];
                    set.binary_search(&edge.u).is_ok() && set.binary_search(&edge.v).is_ok()
                })
                .collect();
            let ones = vec![1; edges.len()];
            let traces = power_traces(model, &edges, &ones, max_power)?;
            let mut fact = 1.0;
            Ok(traces
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    (if k % 2 == 1 { -t } else { t }) / fact
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let index: HashMap<&[usize], usize> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let neighbors = neighbor_lists(model);
    let mut activities: Vec<Vec<f64>> = Vec::with_capacity(sets.len());
    let mut one = vec![0.0; order];
    one[0] = 1.0;
    let mut scratch = vec![0.0; order];

    for (u, set) in sets.iter().enumerate() {
        let n = set.len();
        // Local adjacency of H[U].
        let adj: Vec<u32> = set
            .iter()
            .map(|&x| {
                neighbors[x]
                    .iter()
                    .filter_map(|y| set.binary_search(y).ok())
                    .fold(0u32, |m, j| m | (1 << j))
            })
            .collect();
        let adj_wide = widen(&adj);
        let full = (1u32 << n) - 1;
        let members = |mask: u32| -> Vec<usize> {
            (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| set[i]).collect()
        };
        // Z of an arbitrary subset: product over connected components.
        let z_of = |mask: u32, out: &mut Vec<f64>, scratch: &mut Vec<f64>| {
            out.clone_from(&one);
            let mut left = mask;
            while left != 0 {
                let mut comp = left & left.wrapping_neg();
                loop {
                    let mut grown = comp;
                    let mut bits = comp;
                    while bits != 0 {
                        let v = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        grown |= adj[v] & left;
                    }
                    if grown == comp {
                        break;
                    }
                    comp = grown;
                }
                left &= !comp;
                if comp.count_ones() >= 2 {
                    let z = &partition[index[members(comp).as_slice()]];
                    mul_truncated(out, z, scratch);
                    std::mem::swap(out, scratch);
                }
            }
        };

        let mut w = partition[u].clone();
        let mut rest = vec![0.0; order];
        let mut term = vec![0.0; order];
        // B = {min U}: no polymer covers min U.
        z_of(full & !1, &mut rest, &mut scratch);
        w.iter_mut().zip(&rest).for_each(|(a, b)| *a -= b);
        // B ∋ min U, |B| >= 2, B ≠ U, connected.
        let mut sub = (full - 1) & (full & !1);
        while sub != 0 {
            let block = sub | 1;
            if block != full && super::ursell::spans(&adj_wide, block as u64) {
                let wb = &activities[index[members(block).as_slice()]];
                z_of(full & !block, &mut rest, &mut scratch);
                mul_truncated(wb, &rest, &mut term);
                w.iter_mut().zip(&term).for_each(|(a, b)| *a -= b);
            }
            sub = (sub - 1) & (full & !1);
        }
        // Degrees below |U| - 1 vanish identically; drop the rounding residue.
        w.iter_mut().take(n - 1).for_each(|x| *x = 0.0);
        activities.push(w);
    }

    Ok(sets
        .into_iter()
        .zip(activities)
        .map(|(vertices, coefficients)| Activity {
            vertices,
            coefficients,
        })
        .collect())
}

fn widen(adj: &[u32]) -> Vec<u64> {
    adj.iter().map(|&a| a as u64).collect()
}
