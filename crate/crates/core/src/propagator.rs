//! O(n) propagation of pure conditional states.
//!
//! For a pure initial state the conditional master equation is equivalent to
//! the linear stochastic Schrödinger equation driven by the photocurrent
//! increment `dz`,
//!
//! ```text
//! d psi = (-i H_eff - L^dag L / 2) psi dt + L psi dz,   L = sqrt(M) F_z + i sqrt(K) F_y,
//! ```
//!
//! with `H_eff = -gamma B F_y - sqrt(KM) {F_y, F_z} / 2`, followed by
//! normalization. In Stratonovich form the generator splits into a diagonal
//! piece and a tridiagonal piece:
//!
//! ```text
//! d psi = [-M F_z^2 dt + sqrt(M) F_z dz] psi
//!       + [i F_y (gamma B dt + sqrt(K) dz) - sqrt(KM) F_x dt / 2] psi
//! ```
//!
//! The diagonal flow is integrated exactly, which keeps the step stable when
//! `M F^2 dt` is large; the tridiagonal flow is exponentiated by a scaled
//! Taylor series. The two are composed symmetrically (Strang splitting).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::spin::{SpinOperators, Tridiagonal};
use crate::state::StateVector;

const TAYLOR_TOL: f64 = 1e-16;
const MAX_TAYLOR_TERMS: usize = 64;

/// Scratch buffers reused across steps of one trajectory.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    term: Vec<Complex64>,
    next: Vec<Complex64>,
    diag: Vec<f64>,
}

/// Advances `psi` by one step of the conditional dynamics driven by the
/// photocurrent increment `dz`.
pub fn split_step(
    psi: &StateVector,
    ops: &SpinOperators,
    p: &FilterParams,
    dz: f64,
    work: &mut Workspace,
) -> Result<StateVector> {
    let mut out = psi.clone();
    split_step_in_place(&mut out, ops, p, dz, work)?;
    Ok(out)
}

pub fn split_step_in_place(
    psi: &mut StateVector,
    ops: &SpinOperators,
    p: &FilterParams,
    dz: f64,
    work: &mut Workspace,
) -> Result<()> {
    let n = ops.dim();
    if psi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi.dim(),
        });
    }
    if !dz.is_finite() {
        return Err(Error::Numerical(format!("non-finite record increment {dz}")));
    }
    let sqrt_m = p.m.sqrt();
    let sqrt_k = p.k.sqrt();
    let dt = p.dt;

    // half of exp(-M F_z^2 dt + sqrt(M) F_z dz), shifted by its maximum
    // exponent since normalization follows anyway
    work.diag.clear();
    let m = ops.magnetic_numbers();
    let mut max_exp = f64::NEG_INFINITY;
    for &mi in m {
        let e = 0.5 * (-p.m * mi * mi * dt + sqrt_m * mi * dz);
        max_exp = max_exp.max(e);
        work.diag.push(e);
    }
    for e in work.diag.iter_mut() {
        *e = (*e - max_exp).exp();
    }

    let v = psi.psi.as_mut_slice();
    for (x, &d) in v.iter_mut().zip(&work.diag) {
        *x *= d;
    }

    let theta = p.gamma * p.b * dt + sqrt_k * dz;
    let damping = -0.5 * (p.k * p.m).sqrt() * dt;
    if theta != 0.0 || damping != 0.0 {
        let generator = ops
            .fy_band
            .combine(Complex64::new(0.0, theta), &ops.fx_band, Complex64::new(damping, 0.0));
        expm_apply(&generator, v, work);
    }

    for (x, &d) in v.iter_mut().zip(&work.diag) {
        *x *= d;
    }

    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Numerical("state vector collapsed to zero or overflowed".into()));
    }
    let inv = 1.0 / norm;
    for x in v.iter_mut() {
        *x *= inv;
    }
    psi.time += dt;
    Ok(())
}

/// `v <- exp(A) v` for tridiagonal `A`, by a Taylor series on `s` equal
/// substeps with `||A|| / s <= 1/2`.
pub fn expm_apply(a: &Tridiagonal, v: &mut [Complex64], work: &mut Workspace) {
    let n = v.len();
    let bound = a.norm_bound();
    let substeps = ((bound / 0.5).ceil() as usize).max(1);
    let scale = Complex64::new(1.0 / substeps as f64, 0.0);
    let scaled = if substeps == 1 {
        a.clone()
    } else {
        a.combine(scale, a, Complex64::new(0.0, 0.0))
    };
    work.term.resize(n, Complex64::new(0.0, 0.0));
    work.next.resize(n, Complex64::new(0.0, 0.0));
    for _ in 0..substeps {
        work.term.copy_from_slice(v);
        let vnorm = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 1..=MAX_TAYLOR_TERMS {
            scaled.apply(&work.term, &mut work.next);
            let inv_k = 1.0 / k as f64;
            let mut tnorm: f64 = 0.0;
            for ((t, nx), x) in work.term.iter_mut().zip(&work.next).zip(v.iter_mut()) {
                *t = nx * inv_k;
                *x += *t;
                tnorm = tnorm.max(t.norm());
            }
            if tnorm <= TAYLOR_TOL * vnorm {
                break;
            }
        }
    }
}
