#![allow(dead_code)]

use qclust::model::{model_on_graph, PresetKind, PresetParams, SpinModel};
use qclust::operator::{OperatorMatrix, SiteSpace, SparseOperator};
use qclust::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random simple graph on `n` vertices with maximum degree at most 3: a
/// random tree plus up to `extra` further edges.
pub fn random_degree3_graph(n: usize, extra: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| degree[u] < 3).collect();
        let u = *open.choose(&mut rng).expect("a tree always has a leaf");
        edges.push((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    let mut added = 0;
    for _ in 0..200 {
        if added == extra {
            break;
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        let (u, v) = (u.min(v), u.max(v));
        if u == v || degree[u] >= 3 || degree[v] >= 3 || edges.contains(&(u, v)) {
            continue;
        }
        edges.push((u, v));
        degree[u] += 1;
        degree[v] += 1;
        added += 1;
    }
    edges
}

pub fn path_edges(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

pub fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    let mut e = path_edges(n);
    e.push((0, n - 1));
    e
}

pub fn random_model(n: usize, edges: &[(usize, usize)], seed: u64) -> SpinModel {
    model_on_graph(PresetKind::RandomHermitian, n, edges, &PresetParams::new(seed)).unwrap()
}

pub struct SuiteModel {
    pub label: String,
    pub model: SpinModel,
}

/// Seeded random-interaction models (d = 2, unit-norm edge terms) on paths,
/// cycles and random graphs of maximum degree 3, all with at most 8 vertices.
pub fn oracle_suite() -> Vec<SuiteModel> {
    let mut out = Vec::new();
    let mut seed = 1000;
    let mut push = |label: String, n: usize, edges: Vec<(usize, usize)>| {
        seed += 1;
        out.push(SuiteModel {
            label: format!("{label} seed {seed}"),
            model: random_model(n, &edges, seed),
        });
    };
    for n in 3..=8 {
        for _ in 0..2 {
            push(format!("path {n}"), n, path_edges(n));
            push(format!("cycle {n}"), n, cycle_edges(n));
        }
    }
    for n in 5..=8 {
        for extra in 0..=2 {
            for rep in 0..3u64 {
                let graph_seed = 100 * n as u64 + 10 * extra as u64 + rep;
                let edges = random_degree3_graph(n, extra, graph_seed);
                push(format!("random n={n} extra={extra}"), n, edges);
            }
        }
    }
    out
}

/// `tr_norm(H^k)` for `k = 0..=max` by repeated sparse products.
pub fn hamiltonian_moments(model: &SpinModel, max: usize) -> Vec<f64> {
    let n = model.num_vertices();
    let space = SiteSpace::new((0..n).collect(), model.local_dim()).unwrap();
    let terms: Vec<_> = model
        .edges()
        .iter()
        .map(|e| (1.0, &e.phi, (e.u, e.v)))
        .collect();
    let h = SparseOperator::from_edge_terms(&terms, &space).unwrap();
    let dim = h.dim();
    let mut power = OperatorMatrix::identity(dim).data().to_vec();
    let mut out = vec![1.0];
    for _ in 0..max {
        power = h.mul_dense(&power);
        out.push((0..dim).map(|i| power[i * dim + i].re).sum::<f64>() / dim as f64);
    }
    out
}

/// Taylor coefficients `a_k`, `k < order`, of `log tr_norm exp(-beta H)`
/// from the moment-cumulant recursion.
pub fn taylor_coefficients(model: &SpinModel, order: usize) -> Vec<f64> {
    let mu = hamiltonian_moments(model, order.saturating_sub(1));
    let mut binom = vec![vec![1.0f64; order + 1]; order + 1];
    for i in 1..=order {
        for j in 1..i {
            binom[i][j] = binom[i - 1][j - 1] + binom[i - 1][j];
        }
    }
    let mut kappa = vec![0.0; order];
    let mut coeff = vec![0.0; order];
    let mut fact = 1.0;
    for k in 1..order {
        fact *= k as f64;
        let mut s = mu[k];
        for j in 1..k {
            s -= binom[k - 1][j - 1] * kappa[j] * mu[k - j];
        }
        kappa[k] = s;
        coeff[k] = (if k % 2 == 1 { -s } else { s }) / fact;
    }
    coeff
}

pub fn eval_poly(coeff: &[f64], beta: Complex) -> Complex {
    coeff.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &a| acc * beta + a)
}
