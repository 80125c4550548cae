//! Collective angular-momentum operators for a total spin `F`.
//!
//! All matrices are expressed in the `F_z` eigenbasis ordered by descending
//! magnetic quantum number, `m = F, F-1, ..., -F`; row/column `i` holds
//! `m = F - i`. Units have `hbar = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Hilbert-space dimension accepted unless the caller raises it.
pub const DEFAULT_MAX_DIM: usize = 4001;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Total collective spin `F = N f`, stored as the integer `2F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinQuantum {
    twice: u32,
}

impl SpinQuantum {
    /// Accepts any nonnegative integer or half-integer.
    pub fn new(f: f64) -> Result<Self> {
        let twice = 2.0 * f;
        if !f.is_finite() || f < 0.0 || (twice - twice.round()).abs() > 1e-9 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(f));
        }
        Ok(Self {
            twice: twice.round() as u32,
        })
    }

    pub fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    /// `2F + 1`
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum numbers in basis order.
    pub fn magnetic_numbers(self) -> impl Iterator<Item = f64> {
        let f = self.value();
        (0..self.dim()).map(move |i| f - i as f64)
    }
}

impl std::fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// A square tridiagonal matrix. `upper[i]` is entry `(i, i+1)` and `lower[i]`
/// is entry `(i+1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..n.saturating_sub(1) {
            m[(i, i + 1)] = self.upper[i];
            m[(i + 1, i)] = self.lower[i];
        }
        m
    }

    /// `out = A x`
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        if n == 1 {
            out[0] = self.diag[0] * x[0];
            return;
        }
        out[0] = self.diag[0] * x[0] + self.upper[0] * x[1];
        for i in 1..n - 1 {
            out[i] = self.lower[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.upper[i] * x[i + 1];
        }
        out[n - 1] = self.lower[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    /// `<x|A|x>` for a (not necessarily normalized) vector.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            let mut ax = self.diag[i] * x[i];
            if i + 1 < n {
                ax += self.upper[i] * x[i + 1];
            }
            if i > 0 {
                ax += self.lower[i - 1] * x[i - 1];
            }
            acc += x[i].conj() * ax;
        }
        acc
    }

    /// `A X`, O(n^2).
    pub fn left_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        assert_eq!(x.nrows(), n);
        let mut out = DMatrix::zeros(n, x.ncols());
        for (col_in, mut col_out) in x.column_iter().zip(out.column_iter_mut()) {
            let xs = col_in.as_slice();
            self.apply(xs, col_out.as_mut_slice());
        }
        out
    }

    /// `X A`, O(n^2).
    pub fn right_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        assert_eq!(x.ncols(), n);
        let rows = x.nrows();
        let mut out = DMatrix::zeros(rows, n);
        for j in 0..n {
            let d = self.diag[j];
            let src = x.column(j);
            let mut dst = out.column_mut(j);
            for r in 0..rows {
                dst[r] = src[r] * d;
            }
            if j > 0 {
                let a = self.upper[j - 1];
                let src = x.column(j - 1);
                for r in 0..rows {
                    dst[r] += src[r] * a;
                }
            }
            if j + 1 < n {
                let a = self.lower[j];
                let src = x.column(j + 1);
                for r in 0..rows {
                    dst[r] += src[r] * a;
                }
            }
        }
        out
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i + 1 < n {
                    s += self.upper[i].norm();
                }
                if i > 0 {
                    s += self.lower[i - 1].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: Complex64, other: &Tridiagonal, b: Complex64) -> Tridiagonal {
        let zip = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
        };
        Tridiagonal {
            lower: zip(&self.lower, &other.lower),
            diag: zip(&self.diag, &other.diag),
            upper: zip(&self.upper, &other.upper),
        }
    }
}

/// `F_x`, `F_y`, `F_z` for one value of `F`, held both densely and in
/// tridiagonal form. Immutable once built and shared read-only across
/// trajectories.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    spin: SpinQuantum,
    pub fx: DMatrix<Complex64>,
    pub fy: DMatrix<Complex64>,
    pub fz: DMatrix<Complex64>,
    pub fx_band: Tridiagonal,
    pub fy_band: Tridiagonal,
    pub fz_band: Tridiagonal,
    m: Vec<f64>,
}

impl SpinOperators {
    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// Diagonal of `F_z` in basis order.
    pub fn magnetic_numbers(&self) -> &[f64] {
        &self.m
    }

    pub fn identity(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.dim(), self.dim())
    }
}

/// Builds the collective spin matrices with the default dimension cap.
pub fn build_spin_operators(spin: SpinQuantum) -> Result<SpinOperators> {
    build_spin_operators_capped(spin, DEFAULT_MAX_DIM)
}

pub fn build_spin_operators_capped(spin: SpinQuantum, max_dim: usize) -> Result<SpinOperators> {
    let dim = spin.dim();
    if dim > max_dim {
        return Err(Error::DimensionTooLarge { dim, max: max_dim });
    }
    let f = spin.value();
    let m: Vec<f64> = spin.magnetic_numbers().collect();

    // <m+1| F_+ |m> = sqrt((F - m)(F + m + 1)); m + 1 sits one row above m.
    let raising: Vec<f64> = (1..dim)
        .map(|i| {
            let mi = m[i];
            ((f - mi) * (f + mi + 1.0)).sqrt()
        })
        .collect();

    let half = |c: f64| Complex64::new(0.5 * c, 0.0);
    let fx_band = Tridiagonal {
        lower: raising.iter().map(|&c| half(c)).collect(),
        diag: vec![ZERO; dim],
        upper: raising.iter().map(|&c| half(c)).collect(),
    };
    // F_y = (F_+ - F_-) / 2i
    let fy_band = Tridiagonal {
        lower: raising.iter().map(|&c| Complex64::new(0.0, 0.5 * c)).collect(),
        diag: vec![ZERO; dim],
        upper: raising.iter().map(|&c| Complex64::new(0.0, -0.5 * c)).collect(),
    };
    let fz_band = Tridiagonal {
        lower: vec![ZERO; dim.saturating_sub(1)],
        diag: m.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        upper: vec![ZERO; dim.saturating_sub(1)],
    };

    Ok(SpinOperators {
        spin,
        fx: fx_band.to_dense(),
        fy: fy_band.to_dense(),
        fz: fz_band.to_dense(),
        fx_band,
        fy_band,
        fz_band,
        m,
    })
}

/// Largest entrywise deviation of `x` from its adjoint.
pub fn hermiticity_error(x: &DMatrix<Complex64>) -> f64 {
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}
