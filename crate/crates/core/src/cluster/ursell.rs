//! Ursell functions of small graphs.
//!
//! `phi(H) = (1/|V|!) sum_{E ⊆ E(H) spanning connected} (-1)^|E|`. Both routes
//! return the integer numerator over `|V|!` exactly.

use num_rational::Ratio;

use crate::{Error, Result};

pub const BRUTEFORCE_MAX_VERTICES: usize = 12;
pub const BRUTEFORCE_MAX_EDGES: usize = 28;
pub const FAST_MAX_VERTICES: usize = 20;

/// Simple graph on at most 64 vertices; row `i` of `adjacency` is the
/// neighbor mask of vertex `i`. Self-loops are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IncompatibilityGraph {
    n: usize,
    adjacency: Vec<u64>,
}

impl IncompatibilityGraph {
    pub fn new(n: usize) -> Self {
        assert!((1..=64).contains(&n), "graph must have 1..=64 vertices");
        Self {
            n,
            adjacency: vec![0; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub(crate) fn from_adjacency(adjacency: Vec<u64>) -> Self {
        let mut g = Self::new(adjacency.len());
        g.adjacency = adjacency;
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adjacency[i] |= 1 << j;
            self.adjacency[j] |= 1 << i;
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &[u64] {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i] & (1 << j) != 0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|r| r.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        spans(&self.adjacency, full_mask(self.n))
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Whether the vertices of `within` are connected using rows of `adj`
/// restricted to `within`.
pub(crate) fn spans(adj: &[u64], within: u64) -> bool {
    if within == 0 {
        return true;
    }
    let mut reach = within & within.wrapping_neg();
    loop {
        let mut next = reach;
        let mut bits = reach;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            next |= adj[v] & within;
        }
        if next == reach {
            return reach == within;
        }
        reach = next;
    }
}

/// `phi(H) = numerator / order!`.
#[derive(Clone, Copy, Debug)]
pub struct UrsellValue {
    numerator: i128,
    order: usize,
}

impl UrsellValue {
    pub fn numerator(&self) -> i128 {
        self.numerator
    }

    /// Number of vertices of the graph; the denominator is `order!`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn denominator(&self) -> i128 {
        (1..=self.order as i128).product()
    }

    pub fn to_ratio(&self) -> Ratio<i128> {
        Ratio::new(self.numerator, self.denominator())
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator() as f64
    }
}

impl PartialEq for UrsellValue {
    fn eq(&self, other: &Self) -> bool {
        self.to_ratio() == other.to_ratio()
    }
}

impl Eq for UrsellValue {}

/// Direct sum over every edge subset (Gray-code order, one edge toggled per step).
pub fn ursell_bruteforce(h: &IncompatibilityGraph) -> Result<UrsellValue> {
    let n = h.vertex_count();
    let edges = h.edges();
    if n > BRUTEFORCE_MAX_VERTICES || edges.len() > BRUTEFORCE_MAX_EDGES {
        return Err(Error::Resource(format!(
            "brute-force Ursell limited to {BRUTEFORCE_MAX_VERTICES} vertices and \
             {BRUTEFORCE_MAX_EDGES} edges, got {n} and {}",
            edges.len()
        )));
    }
    let full = full_mask(n);
    let mut adj = vec![0u64; n];
    let mut odd = false;
    let mut total: i128 = if spans(&adj, full) { 1 } else { 0 };
    for step in 1u64..(1u64 << edges.len()) {
        let (i, j) = edges[step.trailing_zeros() as usize];
        adj[i] ^= 1 << j;
        adj[j] ^= 1 << i;
        odd = !odd;
        if spans(&adj, full) {
            total += if odd { -1 } else { 1 };
        }
    }
    Ok(UrsellValue {
        numerator: total,
        order: n,
    })
}

/// Subset recursion in `O(3^n)`: with `a(S) = 1` iff `H[S]` has no edges,
/// `c(S) = a(S) - sum_{min(S) ∈ T ⊊ S} c(T) a(S \ T)` and `phi = c(V) / n!`.
pub fn ursell_fast(h: &IncompatibilityGraph) -> Result<UrsellValue> {
    let n = h.vertex_count();
    if n > FAST_MAX_VERTICES {
        return Err(Error::Resource(format!(
            "Ursell recursion limited to {FAST_MAX_VERTICES} vertices, got {n}"
        )));
    }
    Ok(UrsellValue {
        numerator: connected_signed_count(h.adjacency())?,
        order: n,
    })
}

/// `c(V)` for the graph with adjacency rows `adj`.
pub(crate) fn connected_signed_count(adj: &[u64]) -> Result<i128> {
    let n = adj.len();
    match n {
        1 => return Ok(1),
        2 => return Ok(if adj[0] & 2 != 0 { -1 } else { 0 }),
        _ => {}
    }
    let size = 1usize << n;
    let mut independent = vec![false; size];
    independent[0] = true;
    for s in 1..size {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        independent[s] = independent[rest] && (adj[v] as usize & rest) == 0;
    }
    let overflow = || Error::Numeric("Ursell numerator overflowed i128".into());
    let mut c = vec![0i128; size];
    for s in 1..size {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut acc: i128 = 0;
        if rest != 0 {
            // Proper submasks u of rest, including the empty one.
            let mut u = (rest - 1) & rest;
            loop {
                if independent[rest ^ u] {
                    acc = acc.checked_add(c[u | low]).ok_or_else(overflow)?;
                }
                if u == 0 {
                    break;
                }
                u = (u - 1) & rest;
            }
        }
        c[s] = (independent[s] as i128).checked_sub(acc).ok_or_else(overflow)?;
    }
    Ok(c[size - 1])
}
