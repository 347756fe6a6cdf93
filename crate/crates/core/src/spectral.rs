//! Spin-chain Hamiltonian construction and exact dense diagonalization.
//!
//! Everything downstream (process-map engines, the statevector oracle, the
//! adiabatic sweeps) works in the eigenbasis produced here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest qubit count accepted by the dense builders.
pub const MAX_QUBITS: usize = 12;

const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Parameters of the ZZXZ chain H = sum_i (J s^z_i s^z_{i+1} + x s^x_i + z s^z_i).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub n: usize,
    pub zz_coupling: f64,
    pub x_field: f64,
    pub z_field: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl SpinChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("qubit count must be at least 1".into()));
        }
        if self.n > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "n = {} exceeds dense-representation cap of {MAX_QUBITS}",
                self.n
            )));
        }
        for (name, v) in [
            ("zz_coupling", self.zz_coupling),
            ("x_field", self.x_field),
            ("z_field", self.z_field),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Dense Hermitian Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    entries: DMatrix<Complex64>,
}

impl HamiltonianMatrix {
    /// Wraps a dense matrix, rejecting non-Hermitian input.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let h = Self { entries };
        h.check_hermitian()?;
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                max = max.max(d);
            }
        }
        max
    }

    fn check_hermitian(&self) -> Result<()> {
        let r = self.hermiticity_residual();
        if r >= HERMITICITY_TOL {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian (residual {r:.3e})"
            )));
        }
        Ok(())
    }

    /// H + c*I. Populations are unchanged by the shift; only phase draws move.
    pub fn shifted(&self, c: f64) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[(i, i)] += Complex64::new(c, 0.0);
        }
        Self { entries }
    }
}

/// Builds the ZZXZ chain Hamiltonian for `spec`.
pub fn build_zzxz(spec: &SpinChainSpec) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    let n = spec.n;
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);

    // Convention: qubit i = bit (n-1-i), bit value 0 -> s^z = +1.
    let z_of = |state: usize, qubit: usize| -> f64 {
        if state >> (n - 1 - qubit) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    };

    let bonds: Vec<(usize, usize)> = match spec.boundary {
        Boundary::Periodic => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        Boundary::Open => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
    };

    for state in 0..dim {
        let mut diag = 0.0;
        for &(a, b) in &bonds {
            diag += spec.zz_coupling * z_of(state, a) * z_of(state, b);
        }
        for q in 0..n {
            diag += spec.z_field * z_of(state, q);
        }
        m[(state, state)] = Complex64::new(diag, 0.0);
        for q in 0..n {
            let flipped = state ^ (1 << (n - 1 - q));
            m[(flipped, state)] += Complex64::new(spec.x_field, 0.0);
        }
    }
    HamiltonianMatrix::new(m)
}

/// Trivial field Hamiltonian H0 = sum_i s^z_i; ground state |1...1> with energy -n.
pub fn build_field_z(n: usize) -> Result<HamiltonianMatrix> {
    build_zzxz(&SpinChainSpec {
        n,
        zz_coupling: 0.0,
        x_field: 0.0,
        z_field: 1.0,
        boundary: Boundary::Open,
    })
}

/// Convex combination (1-s) h0 + s ht.
pub fn interpolate(
    h0: &HamiltonianMatrix,
    ht: &HamiltonianMatrix,
    s: f64,
) -> Result<HamiltonianMatrix> {
    if h0.dim() != ht.dim() {
        return Err(Error::DimensionMismatch(format!(
            "h0 is {}-dimensional, ht is {}-dimensional",
            h0.dim(),
            ht.dim()
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("interpolation parameter s = {s} outside [0, 1]")));
    }
    let entries = h0.entries() * Complex64::new(1.0 - s, 0.0)
        + ht.entries() * Complex64::new(s, 0.0);
    Ok(HamiltonianMatrix { entries })
}

/// Sorted eigensystem of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<Complex64>,
    /// lambda_1 - lambda_0 (ground-state targeting).
    pub gap: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.eigenvectors.column(i)
    }
}

/// Exact diagonalization with a deterministic eigenvector phase convention:
/// the largest-magnitude component of each eigenvector is made real positive.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<EigenDecomposition> {
    h.check_hermitian()?;
    let eig = nalgebra::linalg::SymmetricEigen::new(h.entries().clone());
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0usize;
        let mut best = -1.0f64;
        for (row, a) in v.iter().enumerate() {
            let m = a.norm();
            if m > best {
                best = m;
                pivot = row;
            }
        }
        let phase = v[pivot] / v[pivot].norm();
        for row in 0..dim {
            eigenvectors[(row, col)] = v[row] * phase.conj();
        }
    }
    let gap = if dim > 1 {
        eigenvalues[1] - eigenvalues[0]
    } else {
        0.0
    };
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        gap,
    })
}

/// Eigenvalue pairs violating the phase-independence assumption.
#[derive(Debug, Clone, Default)]
pub struct SymmetryReport {
    /// Index pairs (i, j), i < j, with lambda_i ~ -lambda_j.
    pub negation_pairs: Vec<(usize, usize)>,
}

impl SymmetryReport {
    pub fn is_empty(&self) -> bool {
        self.negation_pairs.is_empty()
    }
}

/// Flags eigenvalue pairs with lambda_i ~ -lambda_j, whose phase draws
/// phi = lambda*tau are perfectly correlated and can stall convergence.
/// Pairs where both eigenvalues are themselves ~0 are not reported.
pub fn detect_spectral_symmetry(ed: &EigenDecomposition, tol: f64) -> SymmetryReport {
    let mut report = SymmetryReport::default();
    let n = ed.dim();
    for i in 0..n {
        for j in (i + 1)..n {
            let li = ed.eigenvalues[i];
            let lj = ed.eigenvalues[j];
            if (li + lj).abs() <= tol && (li.abs() > tol || lj.abs() > tol) {
                report.negation_pairs.push((i, j));
            }
        }
    }
    report
}

/// Eigenbasis populations |<phi_i|psi>|^2 of a normalized system state.
pub fn overlap_populations(state: &[Complex64], ed: &EigenDecomposition) -> Result<Vec<f64>> {
    if state.len() != ed.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} amplitudes, eigenbasis has {}",
            state.len(),
            ed.dim()
        )));
    }
    let mut pops = Vec::with_capacity(ed.dim());
    for i in 0..ed.dim() {
        let mut amp = Complex64::new(0.0, 0.0);
        for (row, s) in state.iter().enumerate() {
            amp += ed.eigenvectors[(row, i)].conj() * s;
        }
        pops.push(amp.norm_sqr());
    }
    Ok(pops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zzxz(n: usize, j: f64, x: f64, z: f64, boundary: Boundary) -> HamiltonianMatrix {
        build_zzxz(&SpinChainSpec {
            n,
            zz_coupling: j,
            x_field: x,
            z_field: z,
            boundary,
        })
        .unwrap()
    }

    #[test]
    fn single_qubit_x_plus_z() {
        // H = s^x + s^z has eigenvalues -sqrt(2), +sqrt(2).
        let h = zzxz(1, 1.0, 1.0, 1.0, Boundary::Open);
        let ed = diagonalize(&h).unwrap();
        assert_abs_diff_eq!(ed.eigenvalues[0], -2.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvalues[1], 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn two_qubit_pure_field() {
        let h = zzxz(2, 0.0, 0.0, 1.0, Boundary::Open);
        let ed = diagonalize(&h).unwrap();
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (got, want) in ed.eigenvalues.iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn zzxz_matches_independent_assembly() {
        // Oracle: assemble the 8x8 matrix from explicit Kronecker products.
        let n = 3;
        let id = DMatrix::<Complex64>::identity(2, 2);
        let sx = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let sz = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        );
        let site = |op: &DMatrix<Complex64>, q: usize| -> DMatrix<Complex64> {
            let mut acc = DMatrix::<Complex64>::identity(1, 1);
            for i in 0..n {
                let factor = if i == q { op.clone() } else { id.clone() };
                acc = acc.kronecker(&factor);
            }
            acc
        };
        let mut oracle = DMatrix::<Complex64>::zeros(8, 8);
        for i in 0..n {
            oracle += site(&sz, i) * site(&sz, (i + 1) % n);
            oracle += site(&sx, i);
            oracle += site(&sz, i);
        }
        let h = zzxz(3, 1.0, 1.0, 1.0, Boundary::Periodic);
        let ed = diagonalize(&h).unwrap();
        let ed_oracle = diagonalize(&HamiltonianMatrix::new(oracle).unwrap()).unwrap();
        for (a, b) in ed.eigenvalues.iter().zip(&ed_oracle.eigenvalues) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn field_z_ground_energy_and_gap() {
        let h = build_field_z(9).unwrap();
        let ed = diagonalize(&h).unwrap();
        assert_abs_diff_eq!(ed.eigenvalues[0], -9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.gap, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn field_z_gap_is_two_for_all_sizes() {
        for n in 1..=8 {
            let ed = diagonalize(&build_field_z(n).unwrap()).unwrap();
            assert_abs_diff_eq!(ed.gap, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let h0 = zzxz(2, 1.0, 1.0, 0.0, Boundary::Open);
        let ht = zzxz(2, 0.5, 0.0, 1.0, Boundary::Open);
        let at0 = interpolate(&h0, &ht, 0.0).unwrap();
        let at1 = interpolate(&h0, &ht, 1.0).unwrap();
        assert_eq!(at0.entries(), h0.entries());
        assert_eq!(at1.entries(), ht.entries());

        let d0 = HamiltonianMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        )))
        .unwrap();
        let d1 = d0.shifted(0.0);
        let neg = HamiltonianMatrix::new(-d1.entries()).unwrap();
        let mid = interpolate(&d0, &neg, 0.5).unwrap();
        assert!(mid.entries().iter().all(|e| e.norm() < 1e-15));

        assert!(interpolate(&h0, &ht, 1.5).is_err());
    }

    #[test]
    fn diagonalize_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert!(HamiltonianMatrix::new(m).is_err());
    }

    #[test]
    fn diagonalize_sorts_and_permutes() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let ed = diagonalize(&HamiltonianMatrix::new(m).unwrap()).unwrap();
        assert_eq!(ed.eigenvalues, vec![1.0, 2.0, 3.0]);
        // Permuted identity basis under the phase convention.
        assert_abs_diff_eq!(ed.eigenvectors[(1, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvectors[(2, 1)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvectors[(0, 2)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pauli_x_eigensystem() {
        let h = zzxz(1, 0.0, 1.0, 0.0, Boundary::Open);
        let ed = diagonalize(&h).unwrap();
        assert_abs_diff_eq!(ed.eigenvalues[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvalues[1], 1.0, epsilon = 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!(ed.eigenvectors[(0, 0)].re.abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvectors[(0, 1)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(ed.eigenvectors[(1, 1)].re, s, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for n in 1..=6 {
            let h = zzxz(n, 1.3, 0.7, 0.4, Boundary::Periodic);
            assert!(h.hermiticity_residual() < 1e-12);
            let ed = diagonalize(&h).unwrap();
            let dim = h.dim();
            let max_abs_lambda = ed
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, l| acc.max(l.abs()));
            let mut recon = DMatrix::<Complex64>::zeros(dim, dim);
            for i in 0..dim {
                let v = ed.eigenvectors.column(i);
                recon += (v * v.adjoint()) * Complex64::new(ed.eigenvalues[i], 0.0);
            }
            let resid = (h.entries() - &recon)
                .iter()
                .fold(0.0f64, |acc, e| acc.max(e.norm()));
            assert!(
                resid < 1e-9 * max_abs_lambda,
                "n={n}: reconstruction residual {resid:.3e}"
            );
            let gram = ed.eigenvectors.adjoint() * &ed.eigenvectors;
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn residual_of_ground_state_zzxz4() {
        let h = zzxz(4, 1.0, 1.0, 1.0, Boundary::Periodic);
        let ed = diagonalize(&h).unwrap();
        let v0 = ed.eigenvectors.column(0).clone_owned();
        let resid = (h.entries() * &v0 - &v0 * Complex64::new(ed.eigenvalues[0], 0.0)).norm();
        assert!(resid < 1e-10, "residual {resid:.3e}");
    }

    #[test]
    fn symmetry_detector_flags_pure_zz_chain() {
        let h = zzxz(2, 1.0, 0.0, 0.0, Boundary::Periodic);
        let ed = diagonalize(&h).unwrap();
        let report = detect_spectral_symmetry(&ed, 1e-9);
        let n = ed.dim();
        assert!(report.negation_pairs.contains(&(0, n - 1)));
    }

    #[test]
    fn symmetry_detector_clean_on_zzxz_with_fields() {
        for n in [3usize, 5, 6] {
            let h = zzxz(n, 1.0, 1.0, 1.0, Boundary::Periodic);
            let ed = diagonalize(&h).unwrap();
            let report = detect_spectral_symmetry(&ed, 1e-9);
            assert!(report.is_empty(), "n={n}: {:?}", report.negation_pairs);
        }
    }

    #[test]
    fn symmetry_detector_flags_real_pairs_at_n4() {
        // The periodic unit-field chain at n=4 genuinely contains +-2*sqrt(2)
        // eigenvalue pairs; the detector must report them, and an irrational
        // offset must clear the report.
        let h = zzxz(4, 1.0, 1.0, 1.0, Boundary::Periodic);
        let ed = diagonalize(&h).unwrap();
        let report = detect_spectral_symmetry(&ed, 1e-9);
        assert!(!report.is_empty());
        for &(i, j) in &report.negation_pairs {
            assert_abs_diff_eq!(
                ed.eigenvalues[i].abs(),
                2.0 * std::f64::consts::SQRT_2,
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(
                ed.eigenvalues[j].abs(),
                2.0 * std::f64::consts::SQRT_2,
                epsilon = 1e-9
            );
        }
        let shifted = diagonalize(&h.shifted(std::f64::consts::SQRT_2 / 10.0)).unwrap();
        assert!(detect_spectral_symmetry(&shifted, 1e-9).is_empty());
    }

    #[test]
    fn symmetry_detector_clean_after_offset() {
        let h = zzxz(2, 1.0, 0.0, 0.0, Boundary::Periodic).shifted(std::f64::consts::SQRT_2);
        let ed = diagonalize(&h).unwrap();
        assert!(detect_spectral_symmetry(&ed, 1e-9).is_empty());
    }

    #[test]
    fn overlap_populations_basics() {
        let h = zzxz(2, 1.0, 0.8, 0.3, Boundary::Open);
        let ed = diagonalize(&h).unwrap();
        let phi0: Vec<Complex64> = ed.eigenvectors.column(0).iter().copied().collect();
        let pops = overlap_populations(&phi0, &ed).unwrap();
        assert_abs_diff_eq!(pops[0], 1.0, epsilon = 1e-12);
        assert!(pops[1..].iter().all(|p| *p < 1e-12));

        let s = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
        let sup: Vec<Complex64> = (0..4)
            .map(|row| (ed.eigenvectors[(row, 0)] + ed.eigenvectors[(row, 1)]) * s)
            .collect();
        let pops = overlap_populations(&sup, &ed).unwrap();
        assert_abs_diff_eq!(pops[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pops[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn overlap_populations_sum_to_one_for_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = zzxz(3, 1.0, 1.0, 1.0, Boundary::Periodic);
        let ed = diagonalize(&h).unwrap();
        for _ in 0..50 {
            let mut v: Vec<Complex64> = (0..8)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            let pops = overlap_populations(&v, &ed).unwrap();
            assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(pops.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn capacity_error_past_cap() {
        let err = build_field_z(13).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }
}
