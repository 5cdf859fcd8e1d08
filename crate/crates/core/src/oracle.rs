//! Exact diagonalization of small models, used as ground truth.

use crate::cluster::{estimate, ExpansionResult};
use crate::model::SpinModel;
use crate::operator::{hermitian_eigenvalues, OperatorMatrix, SiteSpace, SparseOperator};
use crate::{Complex, Error, Result};

/// Largest Hilbert space dimension the oracle will diagonalize.
pub const ORACLE_MAX_DIM: usize = 1 << 12;

/// `H = sum_e Phi_e` on the full space, vertices ordered as in the model.
pub fn build_hamiltonian(model: &SpinModel) -> Result<OperatorMatrix> {
    let n = model.num_vertices();
    let d = model.local_dim();
    let too_big = || {
        Error::Resource(format!(
            "exact diagonalization limited to dimension {ORACLE_MAX_DIM}, model has {d}^{n}"
        ))
    };
    let dim = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(d).filter(|&x| x <= ORACLE_MAX_DIM));
    dim.ok_or_else(too_big)?;
    let space = SiteSpace::new((0..n).collect(), d)?;
    let terms: Vec<_> = model
        .edges()
        .iter()
        .map(|e| (1.0, &e.phi, (e.u, e.v)))
        .collect();
    Ok(SparseOperator::from_edge_terms(&terms, &space)?.to_dense())
}

/// Spectrum of the Hamiltonian; evaluating `Z` at many `beta` reuses it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSpectrum {
    eigenvalues: Vec<f64>,
    log_trace_identity: f64,
}

impl ExactSpectrum {
    pub fn new(model: &SpinModel) -> Result<Self> {
        let h = build_hamiltonian(model)?;
        Ok(Self {
            eigenvalues: hermitian_eigenvalues(&h)?,
            log_trace_identity: model.log_trace_identity(),
        })
    }

    /// Ascending eigenvalues of `H`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn partition(&self, beta: Complex) -> Result<ExactResult> {
        if !(beta.re.is_finite() && beta.im.is_finite()) {
            return Err(Error::Domain(format!("beta must be finite, got {beta}")));
        }
        let exponents: Vec<Complex> = self.eigenvalues.iter().map(|&l| -beta * l).collect();
        let shift = exponents
            .iter()
            .map(|x| x.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: Complex = exponents.iter().map(|&x| (x - shift).exp()).sum();
        if sum == Complex::new(0.0, 0.0) {
            return Err(Error::Numeric(format!("Z({beta}) vanishes; log Z is undefined")));
        }
        let log_z = sum.ln() + shift;
        Ok(ExactResult {
            z: log_z.exp(),
            log_z_principal: log_z,
            log_z_normalized: log_z - self.log_trace_identity,
            dim: self.dim(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactResult {
    pub z: Complex,
    /// Principal branch of `log Z`, imaginary part in `(-pi, pi]`.
    pub log_z_principal: Complex,
    /// `log Z - |V| log d`, the normalized-trace logarithm.
    pub log_z_normalized: Complex,
    pub dim: usize,
}

/// `Z(beta) = tr exp(-beta H)` from the full spectrum.
pub fn exact_partition(model: &SpinModel, beta: Complex) -> Result<ExactResult> {
    ExactSpectrum::new(model)?.partition(beta)
}

/// `|exp(T_m) / Z_norm - 1|`. Only the exponential of the difference is used,
/// so the branch of `log Z` does not matter.
pub fn relative_error(t_m: Complex, exact: &ExactResult) -> f64 {
    ((t_m - exact.log_z_normalized).exp() - 1.0).norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub expansion: ExpansionResult,
    pub exact: ExactResult,
    pub relative_error: f64,
    pub epsilon: f64,
    pub within_tolerance: bool,
}

/// Runs the expansion with accuracy `epsilon` and checks it against the exact
/// partition function.
pub fn compare(
    model: &SpinModel,
    beta: Complex,
    epsilon: f64,
    force_region: bool,
) -> Result<ComparisonReport> {
    let exact = exact_partition(model, beta)?;
    let expansion = estimate(model, beta, epsilon, force_region)?;
    let relative_error = relative_error(expansion.t_m, &exact);
    Ok(ComparisonReport {
        within_tolerance: relative_error <= epsilon,
        expansion,
        exact,
        relative_error,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, GraphSpec, PresetKind, PresetParams};

    fn ising(n: usize) -> SpinModel {
        preset(PresetKind::Tfim, GraphSpec::Path(n), &PresetParams::new(0).with("h", 0.0)).unwrap()
    }

    #[test]
    fn single_edge_hamiltonian() {
        let h = build_hamiltonian(&ising(2)).unwrap();
        assert_eq!(h, OperatorMatrix::from_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn path_three_spectrum() {
        let h = build_hamiltonian(&ising(3)).unwrap();
        let diag: Vec<f64> = (0..8).map(|i| h.get(i, i).re).collect();
        assert_eq!(diag, vec![2.0, 0.0, -2.0, 0.0, 0.0, -2.0, 0.0, 2.0]);
        let s = ExactSpectrum::new(&ising(3)).unwrap();
        let want = [-2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0];
        for (a, b) in s.eigenvalues().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_edge_partition() {
        let m = ising(2);
        for b in [0.1, 0.5, 1.0] {
            let r = exact_partition(&m, Complex::new(b, 0.0)).unwrap();
            let want = 2.0 * (-b).exp() + 2.0 * b.exp();
            assert!((r.z.re - want).abs() < 1e-12 * want);
            assert!(r.z.im.abs() < 1e-12);
        }
        for t in [0.3, 1.0, 2.0] {
            let r = exact_partition(&m, Complex::new(0.0, t)).unwrap();
            assert!((r.z.norm() - 4.0 * t.cos().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let m = preset(PresetKind::RandomHermitian, GraphSpec::Cycle(4), &PresetParams::new(3)).unwrap();
        let s = ExactSpectrum::new(&m).unwrap();
        let b = Complex::new(0.7, -0.4);
        let z = s.partition(b).unwrap().z;
        let zc = s.partition(b.conj()).unwrap().z;
        assert!((z.conj() - zc).norm() < 1e-12 * z.norm());
    }

    #[test]
    fn vanishing_partition_function() {
        let m = ising(2);
        let r = exact_partition(&m, Complex::new(0.0, std::f64::consts::FRAC_PI_2));
        // 4 cos(pi/2) is zero only up to rounding; either outcome is acceptable
        // as long as nothing panics.
        if let Ok(r) = r {
            assert!(r.z.norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_cap() {
        let m = preset(PresetKind::Tfim, GraphSpec::Path(13), &PresetParams::new(0)).unwrap();
        assert!(matches!(build_hamiltonian(&m), Err(Error::Resource(_))));
    }
}
