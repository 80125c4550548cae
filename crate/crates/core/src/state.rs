//! Conditional atomic states and their moments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{hermiticity_error, SpinOperators, SpinQuantum, Tridiagonal};

/// Conditional density operator at time `time` (units of tau).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: DMatrix<Complex64>,
    pub time: f64,
}

impl DensityMatrix {
    /// Wraps `rho` after checking it is square, Hermitian within 1e-10 and
    /// unit trace within 1e-10.
    pub fn new(rho: DMatrix<Complex64>, time: f64) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                found: rho.ncols(),
            });
        }
        let herm = hermiticity_error(&rho);
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} is not 1")));
        }
        Ok(Self { rho, time })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = &psi.psi;
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        Self {
            rho: (v * v.adjoint()) / Complex64::new(norm2, 0.0),
            time: psi.time,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
            time: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// `tr(rho^2)`
    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum_ij |rho_ij|^2 for Hermitian rho
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.rho.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every eigenvalue is at least `-tol`, decided by a Cholesky
    /// factorization of `rho + tol * I` that fails on a non-positive pivot.
    pub fn is_positive_within(&self, tol: f64) -> bool {
        let n = self.dim();
        let mut a = self.rho.clone();
        for i in 0..n {
            a[(i, i)] += tol;
        }
        for j in 0..n {
            let mut pivot = a[(j, j)].re;
            for k in 0..j {
                pivot -= a[(j, k)].norm_sqr();
            }
            if !(pivot > 0.0) {
                return false;
            }
            let d = pivot.sqrt();
            a[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= a[(i, k)] * a[(j, k)].conj();
                }
                a[(i, j)] = v / d;
            }
        }
        true
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Normalized pure conditional state `|psi>` at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub psi: DVector<Complex64>,
    pub time: f64,
}

impl StateVector {
    /// Normalizes `psi`; rejects the zero vector.
    pub fn new(psi: DVector<Complex64>, time: f64) -> Result<Self> {
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter("state vector has zero or non-finite norm".into()));
        }
        Ok(Self {
            psi: psi / Complex64::new(norm, 0.0),
            time,
        })
    }

    /// `|F, m>` with `m` given in basis order index `i = F - m`.
    pub fn basis(spin: SpinQuantum, index: usize) -> Result<Self> {
        if index >= spin.dim() {
            return Err(Error::DimensionMismatch {
                expected: spin.dim(),
                found: index,
            });
        }
        let mut psi = DVector::zeros(spin.dim());
        psi[index] = Complex64::new(1.0, 0.0);
        Ok(Self { psi, time: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn mean(&self, op: &Tridiagonal) -> f64 {
        op.quadratic_form(self.psi.as_slice()).re
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Either representation of the conditional state carried by a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalState {
    Density(DensityMatrix),
    Vector(StateVector),
}

impl ConditionalState {
    pub fn dim(&self) -> usize {
        match self {
            ConditionalState::Density(d) => d.dim(),
            ConditionalState::Vector(v) => v.dim(),
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            ConditionalState::Density(d) => d.time,
            ConditionalState::Vector(v) => v.time,
        }
    }

    /// `tr(X rho)` for a tridiagonal Hermitian `X`.
    pub fn mean(&self, op: &Tridiagonal) -> f64 {
        match self {
            ConditionalState::Density(d) => banded_trace_product(op, &d.rho).re,
            ConditionalState::Vector(v) => v.mean(op),
        }
    }

    /// Variance of `F_z`.
    pub fn variance_fz(&self, ops: &SpinOperators) -> f64 {
        let m = ops.magnetic_numbers();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (i, &mi) in m.iter().enumerate() {
            let p = match self {
                ConditionalState::Density(d) => d.rho[(i, i)].re,
                ConditionalState::Vector(v) => v.psi[i].norm_sqr(),
            };
            s1 += p * mi;
            s2 += p * mi * mi;
        }
        s2 - s1 * s1
    }

    pub fn purity(&self) -> f64 {
        match self {
            ConditionalState::Density(d) => d.purity(),
            ConditionalState::Vector(_) => 1.0,
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            ConditionalState::Density(d) => d.clone(),
            ConditionalState::Vector(v) => DensityMatrix::from_pure(v),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ConditionalState::Density(d) => d.is_finite(),
            ConditionalState::Vector(v) => v.is_finite(),
        }
    }
}

/// `tr(A rho)` in O(n) for tridiagonal `A`.
pub(crate) fn banded_trace_product(a: &Tridiagonal, rho: &DMatrix<Complex64>) -> Complex64 {
    let n = a.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc += a.diag[i] * rho[(i, i)];
        if i + 1 < n {
            // A[i][i+1] rho[i+1][i] + A[i+1][i] rho[i][i+1]
            acc += a.upper[i] * rho[(i + 1, i)] + a.lower[i] * rho[(i, i + 1)];
        }
    }
    acc
}

/// The `x`-polarized spin coherent state as a normalized vector, obtained as
/// the top eigenvector of `F_x` with real nonnegative amplitudes.
pub fn coherent_vector_x(ops: &SpinOperators) -> StateVector {
    let n = ops.dim();
    let fx_real = DMatrix::from_fn(n, n, |i, j| ops.fx[(i, j)].re);
    let eig = SymmetricEigen::new(fx_real);
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("dimension is at least one");
    let col = eig.eigenvectors.column(top);
    let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
    let psi = DVector::from_iterator(n, col.iter().map(|&x| Complex64::new(sign * x, 0.0)));
    StateVector::new(psi, 0.0).expect("eigenvector is normalized")
}

/// The `x`-polarized spin coherent state as a density matrix.
pub fn coherent_state_x(ops: &SpinOperators) -> DensityMatrix {
    DensityMatrix::from_pure(&coherent_vector_x(ops))
}

/// `tr(X rho)`
pub fn expectation(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<Complex64> {
    check_dims(x, rho)?;
    // tr(X rho) = sum_ij X_ij rho_ji
    let n = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += x[(i, j)] * rho.rho[(j, i)];
        }
    }
    Ok(acc)
}

/// `tr(X^2 rho) - tr(X rho)^2` for Hermitian `X`.
pub fn variance(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<f64> {
    check_dims(x, rho)?;
    let herm = hermiticity_error(x);
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let mean = expectation(x, rho)?.re;
    let sq = expectation(&(x * x), rho)?.re;
    Ok(sq - mean * mean)
}

fn check_dims(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<()> {
    let n = rho.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if x.nrows() != n { x.nrows() } else { x.ncols() },
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::build_spin_operators;

    fn ops(f: f64) -> SpinOperators {
        build_spin_operators(SpinQuantum::new(f).unwrap()).unwrap()
    }

    /// Closed-form amplitudes sqrt(C(2F, k)) / 2^F of the x coherent state.
    fn binomial_amplitudes(twice: u32) -> Vec<f64> {
        let n = twice as usize;
        let mut log_fact = vec![0.0f64; n + 1];
        for k in 1..=n {
            log_fact[k] = log_fact[k - 1] + (k as f64).ln();
        }
        (0..=n)
            .map(|k| (0.5 * (log_fact[n] - log_fact[k] - log_fact[n - k]) - 0.5 * n as f64 * 2f64.ln()).exp())
            .collect()
    }

    #[test]
    fn spin_half_coherent_state() {
        let rho = coherent_state_x(&ops(0.5));
        for z in rho.rho.iter() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn coherent_state_matches_binomial_form() {
        for twice in [1u32, 4, 21, 100, 300] {
            let o = build_spin_operators(SpinQuantum::from_twice(twice)).unwrap();
            let v = coherent_vector_x(&o);
            for (a, b) in v.psi.iter().zip(binomial_amplitudes(twice)) {
                assert!((a.re - b).abs() < 1e-12 && a.im == 0.0);
            }
        }
    }

    #[test]
    fn coherent_state_moments() {
        for f in [0.5, 1.0, 7.5, 25.0, 100.0] {
            let o = ops(f);
            let rho = coherent_state_x(&o);
            assert!((rho.purity() - 1.0).abs() < 1e-10);
            assert!((expectation(&o.fx, &rho).unwrap().re - f).abs() < 1e-10 * f.max(1.0));
            assert!(expectation(&o.fy, &rho).unwrap().norm() < 1e-10);
            assert!(expectation(&o.fz, &rho).unwrap().norm() < 1e-10);
            assert!((variance(&o.fz, &rho).unwrap() - f / 2.0).abs() < 1e-9 * f.max(1.0));
            assert!((variance(&o.fy, &rho).unwrap() - f / 2.0).abs() < 1e-9 * f.max(1.0));
        }
    }

    #[test]
    fn projection_noise_at_f_100() {
        let o = ops(100.0);
        let rho = coherent_state_x(&o);
        assert!((variance(&o.fz, &rho).unwrap() - 50.0).abs() < 1e-8);
    }

    #[test]
    fn expectation_basics() {
        let o = ops(3.0);
        let rho = coherent_state_x(&o);
        assert!((expectation(&o.identity(), &rho).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(o.dim());
        assert!((expectation(&o.identity(), &mixed).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_has_zero_variance() {
        let o = ops(4.0);
        let top = DensityMatrix::from_pure(&StateVector::basis(o.spin(), 0).unwrap());
        assert!(variance(&o.fz, &top).unwrap().abs() < 1e-14);
        assert!((expectation(&o.fz, &top).unwrap().re - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_and_hermiticity_errors() {
        let o = ops(1.0);
        let rho = coherent_state_x(&ops(2.0));
        assert!(matches!(expectation(&o.fz, &rho), Err(Error::DimensionMismatch { .. })));
        let rho = coherent_state_x(&o);
        let non_herm = &o.fx * Complex64::new(0.0, 1.0);
        assert!(matches!(variance(&non_herm, &rho), Err(Error::NotHermitian(_))));
        let bad = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(DensityMatrix::new(bad, 0.0).is_err());
    }

    #[test]
    fn banded_moments_agree_with_dense() {
        let o = ops(6.5);
        let v = coherent_vector_x(&o);
        let state = ConditionalState::Vector(v.clone());
        let dens = ConditionalState::Density(DensityMatrix::from_pure(&v));
        for (band, dense) in [(&o.fx_band, &o.fx), (&o.fz_band, &o.fz)] {
            let want = expectation(dense, &dens.to_density()).unwrap().re;
            assert!((state.mean(band) - want).abs() < 1e-12);
            assert!((dens.mean(band) - want).abs() < 1e-12);
        }
        assert!((state.variance_fz(&o) - 3.25).abs() < 1e-12);
        assert!((dens.variance_fz(&o) - 3.25).abs() < 1e-12);
    }

    #[test]
    fn positivity_check() {
        let o = ops(1.0);
        let mut rho = coherent_state_x(&o);
        assert!(rho.is_positive_within(1e-6));
        assert!(rho.min_eigenvalue() > -1e-12);
        rho.rho[(0, 0)] -= Complex64::new(0.01, 0.0);
        rho.rho[(2, 2)] += Complex64::new(0.01, 0.0);
        assert!(!rho.is_positive_within(1e-6));
    }
}
