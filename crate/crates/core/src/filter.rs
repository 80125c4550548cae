//! Conditional master equation for the double-pass Faraday measurement and its
//! normalized Euler–Maruyama discretization.
//!
//! With `hbar = 1` the conditional state obeys
//!
//! ```text
//! d rho = i gamma B [F_y, rho] dt + i sqrt(K M) [F_y, {F_z, rho}] dt
//!       + M D[F_z] rho dt + K D[F_y] rho dt
//!       + (sqrt(M) H[F_z] rho + i sqrt(K) [F_y, rho]) dW
//! ```
//!
//! where `D` is the Lindblad dissipator and `H` the measurement superoperator.
//! The feedback term carries the factor `i` that makes it Hermitian; it is the
//! commutator with the effective Hamiltonian `-sqrt(KM) {F_y, F_z} / 2` that
//! appears when the two passes are combined into a single Markov limit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SpinOperators;
use crate::state::{banded_trace_product, DensityMatrix};

/// Eigenvalues below this after an Euler step mark the step as invalid.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Physical and numerical parameters of one filter run. Rates are in units of
/// `1/tau`, `b` in units of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub b: f64,
    pub gamma: f64,
    pub m: f64,
    pub k: f64,
    pub tau: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl FilterParams {
    /// Rounds `tau / dt` to a step count and snaps `dt` so that
    /// `dt * n_steps == tau`.
    pub fn new(b: f64, gamma: f64, m: f64, k: f64, tau: f64, dt: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let ratio = tau / dt;
        let n_steps = ratio.round();
        if (ratio - n_steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau = {tau} is not an integer multiple of dt = {dt}"
            )));
        }
        Self::with_steps(b, gamma, m, k, tau, n_steps as usize)
    }

    pub fn with_steps(b: f64, gamma: f64, m: f64, k: f64, tau: f64, n_steps: usize) -> Result<Self> {
        let p = Self {
            b,
            gamma,
            m,
            k,
            tau,
            dt: tau / n_steps as f64,
            n_steps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.m.is_finite() && self.m >= 0.0) {
            return bad(format!("M must be nonnegative, got {}", self.m));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return bad(format!("K must be nonnegative, got {}", self.k));
        }
        if !(self.b.is_finite() && self.gamma.is_finite()) {
            return bad("B and gamma must be finite".into());
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.n_steps < 100 {
            return bad(format!("dt must be at most tau/100 (got {} steps)", self.n_steps));
        }
        if (self.dt * self.n_steps as f64 - self.tau).abs() > 1e-12 * self.tau.max(1.0) {
            return bad("dt * n_steps must equal tau".into());
        }
        Ok(())
    }

    pub fn with_field(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_rates(mut self, m: f64, k: f64) -> Self {
        self.m = m;
        self.k = k;
        self
    }

    /// Same time span with `2^levels` times as many steps.
    pub fn refined(mut self, levels: u32) -> Self {
        self.n_steps <<= levels;
        self.dt = self.tau / self.n_steps as f64;
        self
    }
}

/// Coefficients of `dt` and `dW` in one increment of the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterIncrement {
    pub drift: DMatrix<Complex64>,
    pub diffusion: DMatrix<Complex64>,
}

/// `D[X] rho = X rho X^dag - (X^dag X rho + rho X^dag X) / 2`
pub fn dissipator(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    check_dims(x, rho)?;
    let xd = x.adjoint();
    let xdx = &xd * x;
    let r = &rho.rho;
    Ok(x * r * &xd - (&xdx * r + r * &xdx) * Complex64::new(0.5, 0.0))
}

/// `H[X] rho = X rho + rho X^dag - tr[(X + X^dag) rho] rho`
pub fn measurement_superop(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    check_dims(x, rho)?;
    let xd = x.adjoint();
    let r = &rho.rho;
    let shift = ((x + &xd) * r).trace();
    Ok(x * r + r * &xd - r * shift)
}

fn check_dims(x: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<()> {
    let n = rho.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.nrows().max(x.ncols()),
        });
    }
    Ok(())
}

/// Drift and diffusion of the filter at `rho`, evaluated with O(n^2) banded
/// products.
pub fn filter_increment(rho: &DensityMatrix, ops: &SpinOperators, p: &FilterParams) -> Result<FilterIncrement> {
    let n = ops.dim();
    if rho.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.dim(),
        });
    }
    if p.m < 0.0 || p.k < 0.0 {
        return Err(Error::InvalidParameter("M and K must be nonnegative".into()));
    }
    let r = &rho.rho;
    let z = ops.magnetic_numbers();
    let fy = &ops.fy_band;
    let i = Complex64::new(0.0, 1.0);
    let sqrt_m = p.m.sqrt();
    let sqrt_k = p.k.sqrt();

    let y_r = fy.left_mul(r);
    let r_y = fy.right_mul(r);
    let comm_y = &y_r - &r_y;

    // {F_z, rho} and D[F_z] rho are elementwise in the F_z basis.
    let anti_z = DMatrix::from_fn(n, n, |a, b| r[(a, b)] * (z[a] + z[b]));
    let diss_z = DMatrix::from_fn(n, n, |a, b| r[(a, b)] * (-0.5 * (z[a] - z[b]).powi(2)));

    let mut drift = &comm_y * (i * p.gamma * p.b) + diss_z * Complex64::new(p.m, 0.0);
    if p.k > 0.0 {
        let y_r_y = fy.left_mul(&r_y);
        let yy_r = fy.left_mul(&y_r);
        let r_yy = fy.right_mul(&r_y);
        let diss_y = y_r_y - (yy_r + r_yy) * Complex64::new(0.5, 0.0);
        drift += diss_y * Complex64::new(p.k, 0.0);
        if p.m > 0.0 {
            let feedback = fy.left_mul(&anti_z) - fy.right_mul(&anti_z);
            drift += feedback * (i * (p.k * p.m).sqrt());
        }
    }

    let mean_z = banded_trace_product(&ops.fz_band, r);
    let meas_z = &anti_z - r * (mean_z * 2.0);
    let diffusion = meas_z * Complex64::new(sqrt_m, 0.0) + comm_y * (i * sqrt_k);

    Ok(FilterIncrement { drift, diffusion })
}

/// Result of one Euler–Maruyama step.
#[derive(Debug, Clone)]
pub struct EulerStep {
    pub rho: DensityMatrix,
    /// Trace of `rho + drift dt + diffusion dW` before renormalization.
    pub raw_trace: f64,
    /// False when the stepped state has an eigenvalue below
    /// `-POSITIVITY_TOLERANCE`. The state is returned unrepaired.
    pub positive: bool,
}

/// `rho' = rho + drift dt + diffusion dW`, then Hermitized and renormalized to
/// unit trace.
pub fn euler_step(rho: &DensityMatrix, ops: &SpinOperators, p: &FilterParams, dw: f64) -> Result<EulerStep> {
    if !dw.is_finite() {
        return Err(Error::Numerical(format!("non-finite Wiener increment {dw}")));
    }
    let inc = filter_increment(rho, ops, p)?;
    let mut next = &rho.rho + inc.drift * Complex64::new(p.dt, 0.0) + inc.diffusion * Complex64::new(dw, 0.0);
    let raw_trace = next.trace().re;
    let adj = next.adjoint();
    next = (next + adj) * Complex64::new(0.5, 0.0);
    let tr = next.trace().re;
    next /= Complex64::new(tr, 0.0);
    let out = DensityMatrix {
        rho: next,
        time: rho.time + p.dt,
    };
    let positive = out.is_finite() && out.is_positive_within(POSITIVITY_TOLERANCE);
    Ok(EulerStep {
        rho: out,
        raw_trace,
        positive,
    })
}
