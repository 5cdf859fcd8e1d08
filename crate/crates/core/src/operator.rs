//! Dense complex operators on small tensor-product spaces.
//!
//! Everything here works on row-major `dim x dim` matrices. Site spaces order
//! their sites with the first site as the most significant tensor factor, so
//! basis index `i` of a space with sites `[s0, s1, s2]` and local dimension
//! `d` is `i = b0 * d^2 + b1 * d + b2`.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::{Error, Result};

/// Maximum entrywise deviation from `M = M^dagger` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Off-diagonal Frobenius tolerance of the Jacobi eigensolver, relative to
/// the Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Largest `log2(total_dim)` a [`SiteSpace`] may describe.
pub const MAX_SPACE_BITS: f64 = 30.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl OperatorMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("operator dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Domain(format!(
                "operator of dimension {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = Complex64::new(x, 0.0);
        }
        m
    }

    /// Builds a matrix from separate real and imaginary row arrays.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if dim == 0 || im.len() != dim {
            return Err(Error::Domain(format!(
                "real part has {} rows, imaginary part has {}",
                dim,
                im.len()
            )));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (r, (re_row, im_row)) in re.iter().zip(im).enumerate() {
            if re_row.len() != dim || im_row.len() != dim {
                return Err(Error::Domain(format!("row {r} is not of length {dim}")));
            }
            data.extend(
                re_row
                    .iter()
                    .zip(im_row)
                    .map(|(&a, &b)| Complex64::new(a, b)),
            );
        }
        Self::new(dim, data)
    }

    pub fn pauli_x() -> Self {
        Self::from_diagonal(&[0.0, 0.0]).with(&[(0, 1, ONE), (1, 0, ONE)])
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self::zeros(2).with(&[(0, 1, -i), (1, 0, i)])
    }

    pub fn pauli_z() -> Self {
        Self::from_diagonal(&[1.0, -1.0])
    }

    fn with(mut self, entries: &[(usize, usize, Complex64)]) -> Self {
        for &(i, j, v) in entries {
            self.set(i, j, v);
        }
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn real_part(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.iter().map(|z| z.re).collect()).collect()
    }

    pub fn imag_part(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.iter().map(|z| z.im).collect()).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        let mut out = Self::zeros(n);
        for i1 in 0..a {
            for j1 in 0..a {
                let x = self.get(i1, j1);
                if x == ZERO {
                    continue;
                }
                for i2 in 0..b {
                    for j2 in 0..b {
                        out.data[(i1 * b + i2) * n + j1 * b + j2] = x * other.get(i2, j2);
                    }
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let x = self.data[i * n + k];
                if x == ZERO {
                    continue;
                }
                let rhs = &other.data[k * n..(k + 1) * n];
                for (o, &y) in row.iter_mut().zip(rhs) {
                    *o += x * y;
                }
            }
        }
        Self { dim: n, data: out }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `max_{i,j} |M[i][j] - conj(M[j][i])|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn require_hermitian(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (max |M - M^dagger| = {defect:e})"
            )));
        }
        Ok(())
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        OperatorMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.matmul(rhs)
    }
}

/// An ordered list of distinct sites, each carrying a `d`-dimensional space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteSpace {
    sites: Vec<usize>,
    d: usize,
}

impl SiteSpace {
    pub fn new(sites: Vec<usize>, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("local dimension must be >= 2, got {d}")));
        }
        let mut sorted = sites.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("site list contains duplicates".into()));
        }
        if sites.len() as f64 * (d as f64).log2() > MAX_SPACE_BITS {
            return Err(Error::Resource(format!(
                "{} sites of dimension {d} exceed the dense dimension limit 2^{MAX_SPACE_BITS}",
                sites.len()
            )));
        }
        Ok(Self { sites, d })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn total_dim(&self) -> usize {
        self.d.pow(self.sites.len() as u32)
    }

    pub fn position(&self, site: usize) -> Option<usize> {
        self.sites.iter().position(|&s| s == site)
    }

    /// Stride of the tensor factor at `position` in the flattened basis index.
    fn stride(&self, position: usize) -> usize {
        self.d.pow((self.sites.len() - 1 - position) as u32)
    }

    fn edge_strides(&self, op: &OperatorMatrix, edge: (usize, usize)) -> Result<(usize, usize)> {
        if op.dim() != self.d * self.d {
            return Err(Error::Domain(format!(
                "edge operator has dimension {}, expected d^2 = {}",
                op.dim(),
                self.d * self.d
            )));
        }
        if edge.0 == edge.1 {
            return Err(Error::Domain(format!("edge ({0}, {0}) is a self-loop", edge.0)));
        }
        let pos = |s: usize| {
            self.position(s)
                .ok_or_else(|| Error::Domain(format!("site {s} is not in the target space")))
        };
        Ok((self.stride(pos(edge.0)?), self.stride(pos(edge.1)?)))
    }
}

/// Embeds a two-site operator acting on `edge = (u, v)` (with `u` the first
/// tensor factor of `op`) into `target`, acting as the identity elsewhere.
pub fn tensor_embed(
    op: &OperatorMatrix,
    edge: (usize, usize),
    target: &SiteSpace,
) -> Result<OperatorMatrix> {
    let (su, sv) = target.edge_strides(op, edge)?;
    let d = target.d;
    let n = target.total_dim();
    let mut out = OperatorMatrix::zeros(n);
    for i in 0..n {
        let (iu, iv) = ((i / su) % d, (i / sv) % d);
        let base = i - iu * su - iv * sv;
        let row = iu * d + iv;
        for bu in 0..d {
            for bv in 0..d {
                out.data[i * n + base + bu * su + bv * sv] = op.get(row, bu * d + bv);
            }
        }
    }
    Ok(out)
}

fn check_dim(m: &OperatorMatrix, space: &SiteSpace) -> Result<()> {
    if m.dim() != space.total_dim() {
        return Err(Error::Domain(format!(
            "matrix dimension {} does not match space dimension {}",
            m.dim(),
            space.total_dim()
        )));
    }
    Ok(())
}

/// `tr(M) / dim`, so that the identity has trace one.
pub fn normalized_trace(m: &OperatorMatrix, space: &SiteSpace) -> Result<Complex64> {
    check_dim(m, space)?;
    Ok(m.trace() / m.dim() as f64)
}

/// Normalized trace of `M^n` by repeated multiplication.
pub fn matrix_power_trace(m: &OperatorMatrix, n: usize, space: &SiteSpace) -> Result<Complex64> {
    check_dim(m, space)?;
    m.require_hermitian()?;
    if n == 0 {
        return Err(Error::Domain("power must be at least 1".into()));
    }
    let mut p = m.clone();
    for _ in 1..n {
        p = p.matmul(m);
    }
    Ok(p.trace() / m.dim() as f64)
}

/// Normalized trace of `M^n` as the mean of the `n`-th powers of the eigenvalues.
pub fn matrix_power_trace_spectral(
    m: &OperatorMatrix,
    n: usize,
    space: &SiteSpace,
) -> Result<Complex64> {
    check_dim(m, space)?;
    if n == 0 {
        return Err(Error::Domain("power must be at least 1".into()));
    }
    let eig = hermitian_eigenvalues(m)?;
    let s: f64 = eig.iter().map(|&l| l.powi(n as i32)).sum();
    Ok(Complex64::new(s / m.dim() as f64, 0.0))
}

/// All eigenvalues of a Hermitian matrix in ascending order, by cyclic Jacobi
/// rotations.
pub fn hermitian_eigenvalues(m: &OperatorMatrix) -> Result<Vec<f64>> {
    m.require_hermitian()?;
    let n = m.dim();
    let mut a = m.data.clone();
    let scale = m.frobenius_norm();
    let target = JACOBI_TOL * scale.max(f64::MIN_POSITIVE);

    let off_norm = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (dim {n})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, n, p, q);
            }
        }
        converged = off_norm(&a) <= target;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// One complex Jacobi rotation zeroing `a[p][q]` (and `a[q][p]`).
fn rotate(a: &mut [Complex64], n: usize, p: usize, q: usize) {
    let b = a[p * n + q];
    let g = b.norm();
    if g == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    // Negligible against both diagonal entries: zero it outright.
    if g < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[p * n + q] = ZERO;
        a[q * n + p] = ZERO;
        return;
    }
    let phase = b / g;
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph_conj = phase.conj();

    // A <- A V, V = diag(1, e^{-i phi}) * [[c, s], [-s, c]] on (p, q).
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * c - ph_conj * akq * s;
        a[k * n + q] = akp * s + ph_conj * akq * c;
    }
    // A <- V^dagger A.
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = apk * c - phase * aqk * s;
        a[q * n + k] = apk * s + phase * aqk * c;
    }
    a[p * n + q] = ZERO;
    a[q * n + p] = ZERO;
    a[p * n + p] = Complex64::new(app - t * g, 0.0);
    a[q * n + q] = Complex64::new(aqq + t * g, 0.0);
}

/// Largest eigenvalue magnitude of a Hermitian matrix.
pub fn operator_norm(m: &OperatorMatrix) -> Result<f64> {
    let eig = hermitian_eigenvalues(m)?;
    Ok(eig.iter().fold(0.0, |acc, &l| acc.max(l.abs())))
}

/// Compressed-row sum of embedded edge operators, used in the inner loops of
/// weight evaluation where the dense embedding would be wasteful.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// `sum_k coeff_k * embed(op_k, edge_k)` on `space`.
    pub fn from_edge_terms(
        terms: &[(f64, &OperatorMatrix, (usize, usize))],
        space: &SiteSpace,
    ) -> Result<Self> {
        let d = space.d;
        let n = space.total_dim();
        let strides = terms
            .iter()
            .map(|&(_, op, edge)| space.edge_strides(op, edge))
            .collect::<Result<Vec<_>>>()?;

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut scratch: Vec<(usize, Complex64)> = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            scratch.clear();
            for (&(coeff, op, _), &(su, sv)) in terms.iter().zip(&strides) {
                let (iu, iv) = ((i / su) % d, (i / sv) % d);
                let base = i - iu * su - iv * sv;
                let row = iu * d + iv;
                for bu in 0..d {
                    for bv in 0..d {
                        let x = op.get(row, bu * d + bv);
                        if x != ZERO {
                            scratch.push((base + bu * su + bv * sv, x * coeff));
                        }
                    }
                }
            }
            scratch.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < scratch.len() {
                let j = scratch[k].0;
                let mut acc = ZERO;
                while k < scratch.len() && scratch[k].0 == j {
                    acc += scratch[k].1;
                    k += 1;
                }
                cols.push(j);
                vals.push(acc);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            dim: n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn to_dense(&self) -> OperatorMatrix {
        let n = self.dim;
        let mut out = OperatorMatrix::zeros(n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                out.data[i * n + j] = v;
            }
        }
        out
    }

    /// `self * x` for a dense row-major `x`.
    pub fn mul_dense(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        debug_assert_eq!(x.len(), n * n);
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for (k, v) in self.row(i) {
                let src = &x[k * n..(k + 1) * n];
                for (o, &y) in row.iter_mut().zip(src) {
                    *o += v * y;
                }
            }
        }
        out
    }

    /// `x * self` for a dense row-major `x`.
    pub fn dense_mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        debug_assert_eq!(x.len(), n * n);
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let xik = x[i * n + k];
                if xik == ZERO {
                    continue;
                }
                for (j, v) in self.row(k) {
                    row[j] += xik * v;
                }
            }
        }
        out
    }
}
