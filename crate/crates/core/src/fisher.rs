//! Quantum Fisher information of conditional states and the resulting
//! Cramér–Rao bounds on the field uncertainty.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::CoupledTriple;
use crate::error::{Error, Result};
use crate::spin::SpinOperators;
use crate::state::{variance, ConditionalState, DensityMatrix, StateVector};

/// Purity below this is flagged on a Fisher-information sample.
pub const PURITY_FLAG: f64 = 0.999;

/// Finite-difference logarithmic derivative `L ~ (rho(B+dB) - rho(B-dB)) / dB`.
#[derive(Debug, Clone, PartialEq)]
pub struct SldMatrix {
    pub l: DMatrix<Complex64>,
    pub db: f64,
}

pub fn sld_finite_difference(plus: &DensityMatrix, minus: &DensityMatrix, db: f64) -> Result<SldMatrix> {
    if plus.dim() != minus.dim() {
        return Err(Error::DimensionMismatch {
            expected: plus.dim(),
            found: minus.dim(),
        });
    }
    if !(db.is_finite() && db > 0.0) {
        return Err(Error::InvalidParameter(format!("dB must be positive, got {db}")));
    }
    let diff = (&plus.rho - &minus.rho) / Complex64::new(db, 0.0);
    let l = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(SldMatrix { l, db })
}

/// `tr(L^2 rho)`
pub fn conditional_qfi(sld: &SldMatrix, rho: &DensityMatrix) -> Result<f64> {
    if sld.l.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sld.l.nrows(),
        });
    }
    let l_rho = &sld.l * &rho.rho;
    // tr(L (L rho)) = sum_ij L_ij (L rho)_ji
    let n = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += sld.l[(i, j)] * l_rho[(j, i)];
        }
    }
    let scale = sld.l.iter().map(|z| z.norm_sqr()).sum::<f64>().max(1.0);
    if acc.re < -1e-8 * scale {
        return Err(Error::NegativeFisherInformation(acc.re));
    }
    Ok(acc.re.max(0.0))
}

/// `tr(L^2 rho)` for pure states in O(n): with `rho = |psi><psi|`,
/// `L |psi> = (|psi+><psi+|psi> - |psi-><psi-|psi>) / dB`.
pub fn conditional_qfi_pure(psi: &StateVector, plus: &StateVector, minus: &StateVector, db: f64) -> Result<f64> {
    let n = psi.dim();
    for other in [plus, minus] {
        if other.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: other.dim(),
            });
        }
    }
    if !(db.is_finite() && db > 0.0) {
        return Err(Error::InvalidParameter(format!("dB must be positive, got {db}")));
    }
    let overlap_plus = plus.psi.dotc(&psi.psi);
    let overlap_minus = minus.psi.dotc(&psi.psi);
    let norm2: f64 = plus
        .psi
        .iter()
        .zip(minus.psi.iter())
        .map(|(a, b)| (a * overlap_plus - b * overlap_minus).norm_sqr())
        .sum();
    Ok(norm2 / (db * db))
}

/// Conditional Fisher information of one coupled triple, plus the purity of
/// its reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiSample {
    pub qfi: f64,
    pub purity: f64,
}

impl QfiSample {
    pub fn purity_flagged(&self) -> bool {
        self.purity < PURITY_FLAG
    }
}

pub fn triple_qfi(triple: &CoupledTriple) -> Result<QfiSample> {
    match (
        &triple.reference.final_state,
        &triple.plus.final_state,
        &triple.minus.final_state,
    ) {
        (ConditionalState::Vector(psi), ConditionalState::Vector(plus), ConditionalState::Vector(minus)) => Ok(QfiSample {
            qfi: conditional_qfi_pure(psi, plus, minus, triple.db)?,
            purity: 1.0,
        }),
        (reference, plus, minus) => {
            let rho = reference.to_density();
            let sld = sld_finite_difference(&plus.to_density(), &minus.to_density(), triple.db)?;
            Ok(QfiSample {
                qfi: conditional_qfi(&sld, &rho)?,
                purity: rho.purity(),
            })
        }
    }
}

/// Ensemble average of conditional Fisher information samples and the derived
/// uncertainty bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiEstimate {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the conditional values.
    pub std: f64,
    /// Standard error of the mean.
    pub sem: f64,
    pub n_valid: usize,
    pub n_excluded: usize,
    /// `1 / sqrt(mean)`
    pub delta_b: f64,
    /// `mean^(-3/2) * sem / 2`
    pub delta_b_err: f64,
    /// `mean^(-3/2) * std / 2`
    pub delta_b_err_raw: f64,
}

impl QfiEstimate {
    pub fn exclusion_rate(&self) -> f64 {
        let total = self.n_valid + self.n_excluded;
        if total == 0 {
            0.0
        } else {
            self.n_excluded as f64 / total as f64
        }
    }
}

pub fn ensemble_qfi(samples: &[f64], n_excluded: usize) -> Result<QfiEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Numerical("Fisher information samples must be finite and nonnegative".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let sem = std / (n as f64).sqrt();
    let (delta_b, delta_b_err, delta_b_err_raw) = if mean > 0.0 {
        let scale = mean.powf(-1.5) / 2.0;
        (mean.powf(-0.5), scale * sem, scale * std)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    Ok(QfiEstimate {
        samples: samples.to_vec(),
        mean,
        std,
        sem,
        n_valid: n,
        n_excluded,
        delta_b,
        delta_b_err,
        delta_b_err_raw,
    })
}

/// Fisher information of the unmeasured Larmor evolution of a pure state:
/// the generator of field displacements is `gamma t F_y`, so
/// `I = 4 gamma^2 t^2 Var(F_y)`.
pub fn analytic_unitary_qfi(rho0: &DensityMatrix, ops: &SpinOperators, gamma: f64, t: f64) -> Result<f64> {
    let purity = rho0.purity();
    if (purity - 1.0).abs() > 1e-8 {
        return Err(Error::NotPure(purity));
    }
    Ok(4.0 * gamma * gamma * t * t * variance(&ops.fy, rho0)?)
}

/// Field-uncertainty references for total spin `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBounds {
    /// `1 / (gamma tau sqrt(2F))`
    pub shotnoise: f64,
    /// `1 / (gamma tau 2F)`
    pub heisenberg: f64,
    /// `1 / (gamma tau F^(3/2))`, two-body coupling with a separable state
    pub two_body: f64,
}

pub fn reference_bounds(f: f64, gamma: f64, tau: f64) -> Result<ReferenceBounds> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::InvalidParameter(format!("F must be positive, got {f}")));
    }
    let gt = gamma * tau;
    Ok(ReferenceBounds {
        shotnoise: 1.0 / (gt * (2.0 * f).sqrt()),
        heisenberg: 1.0 / (gt * 2.0 * f),
        two_body: 1.0 / (gt * f.powf(1.5)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_spin_operators, SpinQuantum};
    use crate::state::coherent_state_x;
    use nalgebra::{DVector, SymmetricEigen};

    fn ops(f: f64) -> SpinOperators {
        build_spin_operators(SpinQuantum::new(f).unwrap()).unwrap()
    }

    /// exp(i a F_y) rho exp(-i a F_y) via the eigendecomposition of F_y.
    fn rotate_y(o: &SpinOperators, rho: &DensityMatrix, angle: f64) -> DensityMatrix {
        let eig = SymmetricEigen::new(o.fy.clone());
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            o.dim(),
            eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, angle * l)),
        ));
        let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        DensityMatrix {
            rho: &u * &rho.rho * u.adjoint(),
            time: rho.time,
        }
    }

    fn frob(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn equal_states_give_zero_sld() {
        let rho = coherent_state_x(&ops(2.0));
        let sld = sld_finite_difference(&rho, &rho, 1e-6).unwrap();
        assert!(frob(&sld.l) == 0.0);
        assert_eq!(conditional_qfi(&sld, &rho).unwrap(), 0.0);
    }

    #[test]
    fn sld_is_linear_in_the_difference() {
        let o = ops(3.0);
        let rho = coherent_state_x(&o);
        let plus = rotate_y(&o, &rho, 1e-3);
        let minus = rotate_y(&o, &rho, -1e-3);
        let one = sld_finite_difference(&plus, &minus, 1e-3).unwrap();
        let doubled_plus = DensityMatrix {
            rho: &minus.rho + (&plus.rho - &minus.rho) * Complex64::new(2.0, 0.0),
            time: 0.0,
        };
        let two = sld_finite_difference(&doubled_plus, &minus, 1e-3).unwrap();
        assert!(frob(&(two.l - one.l * Complex64::new(2.0, 0.0))) < 1e-10);
    }

    #[test]
    fn sld_matches_commutator_limit() {
        let (gamma, tau, b, db) = (1.0, 1.0, 0.1, 1e-6);
        let o = ops(4.0);
        let rho0 = coherent_state_x(&o);
        let at = |field: f64| rotate_y(&o, &rho0, gamma * field * tau);
        let sld = sld_finite_difference(&at(b + db), &at(b - db), db).unwrap();
        let rho = at(b);
        let want = (&o.fy * &rho.rho - &rho.rho * &o.fy) * Complex64::new(0.0, 2.0 * gamma * tau);
        let rel = frob(&(&sld.l - &want)) / frob(&want);
        assert!(rel < 1e-4, "relative error {rel}");
        let qfi = conditional_qfi(&sld, &rho).unwrap();
        assert!((qfi - 2.0 * 4.0 * gamma * gamma * tau * tau).abs() < 1e-3 * 8.0);
    }

    #[test]
    fn mixed_state_arithmetic() {
        let o = ops(0.5);
        let rho = DensityMatrix::maximally_mixed(2);
        let sld = SldMatrix {
            l: o.fz.clone(),
            db: 1.0,
        };
        assert!((conditional_qfi(&sld, &rho).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pure_fast_path_matches_dense() {
        let o = ops(5.0);
        let psi = crate::state::coherent_vector_x(&o);
        let rot = |a: f64| {
            let r = rotate_y(&o, &DensityMatrix::from_pure(&psi), a);
            let eig = SymmetricEigen::new(r.rho.clone());
            let top = eig.eigenvalues.imax();
            StateVector::new(eig.eigenvectors.column(top).into_owned(), 0.0).unwrap()
        };
        let (p, c, m) = (rot(0.2 + 1e-4), rot(0.2), rot(0.2 - 1e-4));
        let fast = conditional_qfi_pure(&c, &p, &m, 1e-4).unwrap();
        let sld = sld_finite_difference(&DensityMatrix::from_pure(&p), &DensityMatrix::from_pure(&m), 1e-4).unwrap();
        let dense = conditional_qfi(&sld, &DensityMatrix::from_pure(&c)).unwrap();
        assert!((fast - dense).abs() < 1e-6 * dense);
        assert!((fast - 10.0).abs() < 1e-3);
    }

    #[test]
    fn ensemble_arithmetic() {
        let e = ensemble_qfi(&[4.0, 4.0, 4.0], 0).unwrap();
        assert_eq!((e.mean, e.delta_b, e.delta_b_err), (4.0, 0.5, 0.0));
        let e = ensemble_qfi(&[1.0, 3.0], 0).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.delta_b - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((e.std - 2f64.sqrt()).abs() < 1e-15);
        assert!((e.delta_b_err - 2f64.powf(-1.5) / 2.0).abs() < 1e-15);
        assert!((e.delta_b_err_raw - 2f64.powf(-1.5) * 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(matches!(ensemble_qfi(&[1.0], 0), Err(Error::TooFewSamples { .. })));
        assert!(ensemble_qfi(&[], 0).is_err());
        let zero = ensemble_qfi(&[0.0, 0.0], 0).unwrap();
        assert!(zero.delta_b.is_infinite());
    }

    #[test]
    fn shotnoise_samples_reproduce_shotnoise_bound() {
        let f = 25.0;
        let e = ensemble_qfi(&vec![2.0 * f; 10], 0).unwrap();
        let r = reference_bounds(f, 1.0, 1.0).unwrap();
        assert!((e.delta_b - r.shotnoise).abs() < 1e-15);
    }

    #[test]
    fn unitary_qfi_of_coherent_and_cat_states() {
        for f in [0.5, 3.0, 20.0] {
            let o = ops(f);
            let rho = coherent_state_x(&o);
            let t = 0.7;
            let q = analytic_unitary_qfi(&rho, &o, 1.3, t).unwrap();
            assert!((q - 2.0 * f * 1.3f64.powi(2) * t * t).abs() < 1e-9 * q);
            assert_eq!(analytic_unitary_qfi(&rho, &o, 1.0, 0.0).unwrap(), 0.0);
        }
        // N spin-1/2 atoms in a y-basis cat state: F = N / 2, I = gamma^2 t^2 N^2
        let n_atoms = 12.0;
        let o = ops(n_atoms / 2.0);
        let eig = SymmetricEigen::new(o.fy.clone());
        let up = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
        let down = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
        let cat = StateVector::new(up + down, 0.0).unwrap();
        let q = analytic_unitary_qfi(&DensityMatrix::from_pure(&cat), &o, 1.0, 1.0).unwrap();
        assert!((q - n_atoms * n_atoms).abs() < 1e-8);
        let mixed = DensityMatrix::maximally_mixed(o.dim());
        assert!(matches!(analytic_unitary_qfi(&mixed, &o, 1.0, 1.0), Err(Error::NotPure(_))));
    }

    #[test]
    fn reference_bound_values() {
        let r = reference_bounds(2.0, 1.0, 1.0).unwrap();
        assert_eq!((r.shotnoise, r.heisenberg), (0.5, 0.25));
        let r = reference_bounds(100.0, 1.0, 1.0).unwrap();
        assert!((r.shotnoise - 0.070_710_678_118_654_76).abs() < 1e-15);
        assert_eq!(r.heisenberg, 0.005);
        assert!((r.two_body - 1e-3).abs() < 1e-18);
        assert!(reference_bounds(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn negative_qfi_is_an_error() {
        let o = ops(0.5);
        let bad = DensityMatrix {
            rho: DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)])),
            time: 0.0,
        };
        let sld = SldMatrix {
            l: &o.fz * Complex64::new(0.0, 0.0) + DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])),
            db: 1.0,
        };
        assert!(matches!(conditional_qfi(&sld, &bad), Err(Error::NegativeFisherInformation(_))));
    }
}
