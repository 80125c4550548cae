//! Ensemble studies built on coupled trajectories: Fisher information at one
//! operating point, sweeps over the spin size, optimization of the feedback
//! strength `K`, and log-log power-law fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{coupled_triple, NoiseSharing, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::fisher::{ensemble_qfi, reference_bounds, triple_qfi, QfiEstimate, ReferenceBounds};
use crate::noise::NoiseSource;
use crate::spin::{build_spin_operators, SpinOperators, SpinQuantum};
use crate::state::{coherent_state_x, coherent_vector_x, ConditionalState};

/// Largest fraction of excluded triples for which a point is still reported
/// as valid.
pub const MAX_EXCLUSION_RATE: f64 = 0.01;

/// How the conditional states are stored and stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Pure state vectors with the split-step propagator.
    #[default]
    Vector,
    /// Density matrices with the Euler–Maruyama step.
    Density,
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(Self::Vector),
            "density" => Ok(Self::Density),
            other => Err(Error::Config(format!(
                "unknown representation '{other}' (expected 'vector' or 'density')"
            ))),
        }
    }
}

/// Settings shared by every trajectory of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub n_trajectories: usize,
    pub db: f64,
    /// Base time step; the run uses `dt / 2^refinement`.
    pub dt: f64,
    pub tau: f64,
    pub gamma: f64,
    pub b_true: f64,
    pub seed: u64,
    pub sharing: NoiseSharing,
    pub representation: Representation,
    /// Brownian-bridge halvings of the base step.
    pub refinement: u32,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            db: 1e-6,
            dt: 1e-3,
            tau: 1.0,
            gamma: 1.0,
            b_true: 0.1,
            seed: 1,
            sharing: NoiseSharing::Innovations,
            representation: Representation::Vector,
            refinement: 0,
        }
    }
}

impl EnsembleSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least 2 trajectories are needed, got {}",
                self.n_trajectories
            )));
        }
        if !(self.db.is_finite() && self.db > 0.0) {
            return Err(Error::InvalidParameter(format!("dB must be positive, got {}", self.db)));
        }
        if !(self.gamma.is_finite() && self.gamma != 0.0) {
            return Err(Error::InvalidParameter("gamma must be finite and nonzero".into()));
        }
        self.params(0.0, 0.0).map(|_| ())
    }

    /// Filter parameters at the true field for rates `m`, `k`.
    pub fn params(&self, m: f64, k: f64) -> Result<FilterParams> {
        Ok(FilterParams::new(self.b_true, self.gamma, m, k, self.tau, self.dt)?.refined(self.refinement))
    }

    fn initial_state(&self, ops: &SpinOperators) -> ConditionalState {
        match self.representation {
            Representation::Vector => ConditionalState::Vector(coherent_vector_x(ops)),
            Representation::Density => ConditionalState::Density(coherent_state_x(ops)),
        }
    }
}

/// One coupled triple's contribution to an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleSample {
    pub stream_index: u64,
    pub conditional_qfi: f64,
    pub purity: f64,
    pub valid: bool,
}

/// Ensemble Fisher information at one `(F, M, K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiPoint {
    pub f: f64,
    pub m: f64,
    pub k: f64,
    pub samples: Vec<TripleSample>,
    pub estimate: QfiEstimate,
    /// Valid samples whose reference state had purity below the flag level.
    pub n_purity_flagged: usize,
    /// False when more than [`MAX_EXCLUSION_RATE`] of the triples were
    /// excluded. With fewer than two valid triples the estimate is NaN.
    pub valid: bool,
}

fn run_triple(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    s: &EnsembleSettings,
    stream_index: u64,
) -> Result<TripleSample> {
    let noise = NoiseSource::new(s.seed, stream_index).refined(s.refinement);
    let triple = coupled_triple(rho0, ops, p, s.db, noise, s.sharing, &TrajectoryOptions::endpoints_only())?;
    let invalid = TripleSample {
        stream_index,
        conditional_qfi: f64::NAN,
        purity: f64::NAN,
        valid: false,
    };
    if !triple.valid {
        return Ok(invalid);
    }
    match triple_qfi(&triple) {
        Ok(q) => Ok(TripleSample {
            stream_index,
            conditional_qfi: q.qfi,
            purity: q.purity,
            valid: true,
        }),
        Err(Error::NegativeFisherInformation(_)) | Err(Error::Numerical(_)) => Ok(invalid),
        Err(e) => Err(e),
    }
}

/// Runs `n_trajectories` coupled triples for spin `f` and aggregates their
/// conditional Fisher information. Stream `i` of the master seed drives
/// triple `i`, so results do not depend on scheduling.
pub fn qfi_point(f: SpinQuantum, m: f64, k: f64, s: &EnsembleSettings) -> Result<QfiPoint> {
    let ops = build_spin_operators(f)?;
    qfi_point_with_ops(&ops, m, k, s)
}

pub fn qfi_point_with_ops(ops: &SpinOperators, m: f64, k: f64, s: &EnsembleSettings) -> Result<QfiPoint> {
    s.validate()?;
    let p = s.params(m, k)?;
    let rho0 = s.initial_state(ops);
    let samples = (0..s.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_triple(&rho0, ops, &p, s, i))
        .collect::<Result<Vec<_>>>()?;

    let good: Vec<&TripleSample> = samples.iter().filter(|x| x.valid).collect();
    let n_excluded = samples.len() - good.len();
    let values: Vec<f64> = good.iter().map(|x| x.conditional_qfi).collect();
    let estimate = if values.len() >= 2 {
        ensemble_qfi(&values, n_excluded)?
    } else {
        QfiEstimate {
            samples: values,
            mean: f64::NAN,
            std: f64::NAN,
            sem: f64::NAN,
            n_valid: good.len(),
            n_excluded,
            delta_b: f64::NAN,
            delta_b_err: f64::NAN,
            delta_b_err_raw: f64::NAN,
        }
    };
    let n_purity_flagged = good.iter().filter(|x| x.purity < crate::fisher::PURITY_FLAG).count();
    let valid = estimate.exclusion_rate() <= MAX_EXCLUSION_RATE;
    Ok(QfiPoint {
        f: ops.spin().value(),
        m,
        k,
        samples,
        estimate,
        n_purity_flagged,
        valid,
    })
}

/// How `M` and `K` are chosen at each spin size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CouplingSchedule {
    FixedMk { m: f64, k: f64 },
    /// `M = K = c / (tau F^alpha)`
    ScalingLaw { c: f64, alpha: f64 },
}

impl CouplingSchedule {
    pub fn rates(&self, f: f64, tau: f64) -> Result<(f64, f64)> {
        match *self {
            CouplingSchedule::FixedMk { m, k } => Ok((m, k)),
            CouplingSchedule::ScalingLaw { c, alpha } => scaling_params(f, c, alpha, tau),
        }
    }
}

/// `M = K = c / (tau F^alpha)`
pub fn scaling_params(f: f64, c: f64, alpha: f64, tau: f64) -> Result<(f64, f64)> {
    if !(f > 0.0 && c > 0.0 && tau > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling law needs F, c, tau > 0 (got F={f}, c={c}, tau={tau}, alpha={alpha})"
        )));
    }
    let rate = c / (tau * f.powf(alpha));
    Ok((rate, rate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub f_values: Vec<f64>,
    pub schedule: CouplingSchedule,
    pub ensemble: EnsembleSettings,
    /// Spin per atom `f`, used only to report `N = F / f`.
    pub spin_per_atom: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.f_values.is_empty() {
            return Err(Error::InvalidParameter("no F values to sweep".into()));
        }
        for f in &self.f_values {
            SpinQuantum::new(*f)?;
        }
        if self.f_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("F values must be strictly increasing".into()));
        }
        if !(self.spin_per_atom > 0.0) {
            return Err(Error::InvalidParameter("spin per atom must be positive".into()));
        }
        self.ensemble.validate()
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub f: f64,
    pub n_atoms: f64,
    pub m: f64,
    pub k: f64,
    pub qfi_mean: f64,
    pub qfi_sem: f64,
    pub delta_b: f64,
    pub delta_b_err: f64,
    pub refs: ReferenceBounds,
    pub excluded: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub points: Vec<QfiPoint>,
}

/// Ensemble Fisher information for every spin size in `cfg`, in order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let s = &cfg.ensemble;
    let mut rows = Vec::with_capacity(cfg.f_values.len());
    let mut points = Vec::with_capacity(cfg.f_values.len());
    for &f in &cfg.f_values {
        let (m, k) = cfg.schedule.rates(f, s.tau)?;
        let point = qfi_point(SpinQuantum::new(f)?, m, k, s)?;
        let e = &point.estimate;
        rows.push(SweepRow {
            f,
            n_atoms: f / cfg.spin_per_atom,
            m,
            k,
            qfi_mean: e.mean,
            qfi_sem: e.sem,
            delta_b: e.delta_b,
            delta_b_err: e.delta_b_err,
            refs: reference_bounds(f, s.gamma, s.tau)?,
            excluded: e.n_excluded,
            valid: point.valid,
        });
        points.push(point);
    }
    Ok(SweepResult { rows, points })
}

/// Position of the best field uncertainty in a sweep that stops improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub index: usize,
    pub f: f64,
    pub delta_b: f64,
}

/// Minimum of `delta_b` over `(f, delta_b)` points, reported only if it is
/// followed by at least two points, neither of which improves on it.
pub fn detect_saturation(points: &[(f64, f64)]) -> Option<Saturation> {
    let (index, &(f, delta_b)) = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.is_finite())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let after = &points[index + 1..];
    if after.len() >= 2 && after[..2].iter().all(|p| !(p.1 < delta_b)) {
        Some(Saturation { index, f, delta_b })
    } else {
        None
    }
}

/// Log-spaced search grid for the feedback strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    /// Golden-section iterations after the grid scan.
    pub refine_iterations: usize,
}

impl Default for KGrid {
    fn default() -> Self {
        Self {
            k_min: 1e-6,
            k_max: 1.0,
            points: 13,
            refine_iterations: 8,
        }
    }
}

impl KGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.k_min > 0.0 && self.k_max >= self.k_min && self.points >= 1) {
            return Err(Error::InvalidParameter(format!(
                "K grid needs 0 < k_min <= k_max and at least one point, got {self:?}"
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.k_min]);
        }
        let (lo, hi) = (self.k_min.log10(), self.k_max.log10());
        let step = (hi - lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| 10f64.powf(lo + step * i as f64)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEvaluation {
    pub k: f64,
    pub qfi: f64,
    pub sem: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KOptimum {
    pub f: f64,
    pub m: f64,
    pub k_star: f64,
    pub qfi_at_k_star: f64,
    /// Every evaluation, grid points first, in evaluation order.
    pub evaluations: Vec<KEvaluation>,
    /// The grid profile has more than one maximum that noise cannot explain;
    /// `k_star` is then the best grid point.
    pub warning: bool,
}

/// Maximizes the ensemble Fisher information over `K` at fixed `F`, `M`.
/// Every evaluation uses the same noise streams, so differences between `K`
/// values are not masked by sampling noise.
pub fn optimize_k(f: SpinQuantum, m: f64, s: &EnsembleSettings, grid: &KGrid) -> Result<KOptimum> {
    let ops = build_spin_operators(f)?;
    let mut evaluations = Vec::new();
    let eval = |k: f64, evaluations: &mut Vec<KEvaluation>| -> Result<f64> {
        let point = qfi_point_with_ops(&ops, m, k, s)?;
        let qfi = if point.valid { point.estimate.mean } else { f64::NEG_INFINITY };
        evaluations.push(KEvaluation {
            k,
            qfi: point.estimate.mean,
            sem: point.estimate.sem,
            valid: point.valid,
        });
        Ok(qfi)
    };

    let ks = grid.values()?;
    let mut scores = Vec::with_capacity(ks.len());
    for &k in &ks {
        scores.push(eval(k, &mut evaluations)?);
    }
    // strict comparison keeps the smallest K among ties
    let mut best = 0;
    for (i, q) in scores.iter().enumerate() {
        if *q > scores[best] {
            best = i;
        }
    }
    if scores[best] == f64::NEG_INFINITY {
        return Err(Error::Numerical("every K on the grid exceeded the exclusion limit".into()));
    }

    let warning = significant_maxima(&evaluations[..ks.len()]) > 1;
    let (mut k_star, mut q_star) = (ks[best], scores[best]);
    if !warning && ks.len() > 1 {
        let lo = ks[best.saturating_sub(1)].log10();
        let hi = ks[(best + 1).min(ks.len() - 1)].log10();
        let (k, q) = golden_section(lo, hi, grid.refine_iterations, |x| eval(10f64.powf(x), &mut evaluations))?;
        if q > q_star {
            k_star = k;
            q_star = q;
        }
    }
    Ok(KOptimum {
        f: f.value(),
        m,
        k_star,
        qfi_at_k_star: q_star,
        evaluations,
        warning,
    })
}

/// Local maxima of a grid profile that stand above both neighbours by more
/// than twice the combined standard error.
fn significant_maxima(profile: &[KEvaluation]) -> usize {
    let n = profile.len();
    (0..n)
        .filter(|&i| {
            let here = &profile[i];
            let beats = |j: usize| {
                let other = &profile[j];
                let noise = 2.0 * (here.sem.powi(2) + other.sem.powi(2)).sqrt();
                here.qfi - other.qfi > noise
            };
            (i == 0 || beats(i - 1)) && (i + 1 == n || beats(i + 1))
        })
        .count()
}

/// Maximizes `g` on `[lo, hi]`; returns the best abscissa and value seen.
fn golden_section(
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    let mut best = if g2 > g1 { (x2, g2) } else { (x1, g1) };
    for _ in 0..iterations {
        if g1 >= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1)?;
            if g1 > best.1 || (g1 == best.1 && x1 < best.0) {
                best = (x1, g1);
            }
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2)?;
            if g2 > best.1 {
                best = (x2, g2);
            }
        }
    }
    Ok((10f64.powf(best.0), best.1))
}

/// Ordinary least squares of `log10(delta_b)` on `log10(F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// The `(F, delta_b)` points that were fitted.
    pub points: Vec<(f64, f64)>,
}

pub fn powerlaw_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidParameter("power-law fit needs positive finite points".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs distinct F values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(ScalingFit {
        slope,
        intercept,
        residual_rms: (ss / n).sqrt(),
        points: points.to_vec(),
    })
}

/// `n` values spaced evenly in `log F` between `lo` and `hi`, rounded to the
/// nearest half-integer and deduplicated.
pub fn log_spaced_spins(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::InvalidParameter(format!(
            "log spacing needs 0 < lo < hi and n >= 2 (got {lo}, {hi}, {n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let f = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
            (2.0 * f).round() / 2.0
        })
        .collect();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> EnsembleSettings {
        EnsembleSettings {
            n_trajectories: n,
            dt: 1e-2,
            ..Default::default()
        }
    }

    #[test]
    fn scaling_params_values() {
        let (m, k) = scaling_params(1.0, 0.589, 0.77, 1.0).unwrap();
        assert_eq!((m, k), (0.589, 0.589));
        let (m, _) = scaling_params(100.0, 0.589, 0.0, 1.0).unwrap();
        assert_eq!(m, 0.589);
        let (m, _) = scaling_params(100.0, 0.589, 0.77, 1.0).unwrap();
        assert!((m - 0.589 * 100f64.powf(-0.77)).abs() < 1e-15);
        assert!(scaling_params(0.0, 0.589, 0.77, 1.0).is_err());
        assert!(scaling_params(10.0, -1.0, 0.77, 1.0).is_err());
    }

    #[test]
    fn unmeasured_sweep_is_shotnoise() {
        let cfg = SweepConfig {
            f_values: vec![1.0, 2.5, 6.0],
            schedule: CouplingSchedule::FixedMk { m: 0.0, k: 0.0 },
            ensemble: small(3),
            spin_per_atom: 0.5,
        };
        let res = run_sweep(&cfg).unwrap();
        for row in &res.rows {
            assert!((row.delta_b / row.refs.shotnoise - 1.0).abs() < 1e-2, "{row:?}");
            assert_eq!(row.n_atoms, 2.0 * row.f);
            assert_eq!(row.excluded, 0);
        }
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        let mut cfg = SweepConfig {
            f_values: vec![2.0, 1.0],
            schedule: CouplingSchedule::FixedMk { m: 1.0, k: 0.0 },
            ensemble: small(3),
            spin_per_atom: 0.5,
        };
        assert!(run_sweep(&cfg).is_err());
        cfg.f_values = vec![1.0, 1.3];
        assert!(run_sweep(&cfg).is_err());
        cfg.f_values = vec![1.0];
        cfg.ensemble.n_trajectories = 1;
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn point_is_reproducible_and_order_free() {
        let s = small(6);
        let a = qfi_point(SpinQuantum::new(4.0).unwrap(), 1.0, 0.05, &s).unwrap();
        let b = qfi_point(SpinQuantum::new(4.0).unwrap(), 1.0, 0.05, &s).unwrap();
        assert_eq!(a, b);
        let idx: Vec<u64> = a.samples.iter().map(|x| x.stream_index).collect();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn density_and_vector_points_agree_without_measurement() {
        let mut s = small(3);
        s.b_true = 0.0;
        let f = SpinQuantum::new(2.0).unwrap();
        let v = qfi_point(f, 0.0, 0.0, &s).unwrap();
        s.representation = Representation::Density;
        let d = qfi_point(f, 0.0, 0.0, &s).unwrap();
        assert!(d.valid && v.valid);
        for (a, b) in v.samples.iter().zip(&d.samples) {
            assert!((a.conditional_qfi / b.conditional_qfi - 1.0).abs() < 1e-3, "{a:?} {b:?}");
        }
    }

    #[test]
    fn coarse_density_runs_are_excluded() {
        let mut s = small(4);
        s.representation = Representation::Density;
        let point = qfi_point(SpinQuantum::new(2.0).unwrap(), 0.5, 0.05, &s).unwrap();
        assert!(!point.valid);
        assert_eq!(point.estimate.n_excluded, 4);
        assert!(point.estimate.delta_b.is_nan());
    }

    #[test]
    fn saturation_detection() {
        let pts = [(1.0, 5.0), (2.0, 3.0), (3.0, 2.0), (4.0, 2.5), (5.0, 2.1)];
        let sat = detect_saturation(&pts).unwrap();
        assert_eq!((sat.index, sat.f), (2, 3.0));
        // still improving at the end
        assert!(detect_saturation(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]).is_none());
        // only one point after the minimum
        assert!(detect_saturation(&[(1.0, 3.0), (2.0, 1.0), (3.0, 2.0)]).is_none());
        assert!(detect_saturation(&[]).is_none());
    }

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 50.0, 120.0].iter().map(|&f| (f, 7.0 / f)).collect();
        let fit = powerlaw_fit(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert!((fit.intercept - 7f64.log10()).abs() < 1e-12);

        let shot: Vec<(f64, f64)> = [1.0, 5.0, 25.0]
            .iter()
            .map(|&f| (f, reference_bounds(f, 1.0, 1.0).unwrap().shotnoise))
            .collect();
        assert!((powerlaw_fit(&shot).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_input_errors() {
        assert!(matches!(
            powerlaw_fit(&[(1.0, 1.0), (2.0, 0.5)]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(powerlaw_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 0.2)]).is_err());
        assert!(powerlaw_fit(&[(2.0, 1.0), (2.0, 0.5), (2.0, 0.2)]).is_err());
    }

    #[test]
    fn k_grid_values() {
        let g = KGrid::default().values().unwrap();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-6).abs() < 1e-20 && (g[12] - 1.0).abs() < 1e-12);
        assert!((g[8] - 1e-2).abs() < 1e-15);
        let one = KGrid {
            points: 1,
            k_min: 3e-3,
            k_max: 3e-3,
            refine_iterations: 5,
        };
        assert_eq!(one.values().unwrap(), vec![3e-3]);
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let grid = KGrid {
            points: 1,
            k_min: 1e-3,
            k_max: 1e-3,
            refine_iterations: 5,
        };
        let opt = optimize_k(SpinQuantum::new(3.0).unwrap(), 1.0, &small(4), &grid).unwrap();
        assert_eq!(opt.k_star, 1e-3);
        assert_eq!(opt.evaluations.len(), 1);
        assert_eq!(opt.qfi_at_k_star, opt.evaluations[0].qfi);
    }

    #[test]
    fn optimum_is_no_worse_than_any_grid_point() {
        let grid = KGrid {
            k_min: 1e-4,
            k_max: 1e-1,
            points: 4,
            refine_iterations: 3,
        };
        let opt = optimize_k(SpinQuantum::new(5.0).unwrap(), 0.0, &small(4), &grid).unwrap();
        for e in &opt.evaluations[..4] {
            assert!(opt.qfi_at_k_star >= e.qfi);
        }
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, _) = golden_section(-3.0, 1.0, 40, |x| Ok(-(x + 1.0) * (x + 1.0))).unwrap();
        assert!((x.log10() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_spacing() {
        let f = log_spaced_spins(10.0, 120.0, 8).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f[0], 10.0);
        assert_eq!(f[7], 120.0);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert!(f.iter().all(|x| (2.0 * x).fract() == 0.0));
    }
}
