//! Measurement records and filters run along them.
//!
//! A reference trajectory at the true field produces the photocurrent record
//! `dz = 2 sqrt(M) <F_z> dt + dW`. Any other filter (for instance one at
//! `B +- dB`) can be run along the same record, computing its own innovations
//! from its own prediction of `<F_z>`. Alternatively several filters can share
//! the innovations `dW` themselves, each producing its own record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{euler_step, FilterParams};
use crate::noise::NoiseSource;
use crate::propagator::{split_step_in_place, Workspace};
use crate::spin::SpinOperators;
use crate::state::ConditionalState;

/// Which stochastic input the `B`, `B + dB` and `B - dB` filters have in
/// common.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSharing {
    /// All three filters are driven by the same innovations `dW`.
    #[default]
    Innovations,
    /// A record generated at the true field is filtered at `B +- dB`.
    Record,
}

impl std::str::FromStr for NoiseSharing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "innovations" => Ok(Self::Innovations),
            "record" => Ok(Self::Record),
            other => Err(Error::Config(format!(
                "unknown noise sharing '{other}' (expected 'innovations' or 'record')"
            ))),
        }
    }
}

/// Photocurrent increments together with what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub dz: Vec<f64>,
    pub dt: f64,
    pub params_used: FilterParams,
    pub noise: NoiseSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryOptions {
    /// Keep every `snapshot_stride`-th state (0 keeps none).
    pub snapshot_stride: usize,
    /// Record moments at every step; otherwise only the initial and final
    /// entries are kept.
    pub full_series: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 0,
            full_series: true,
        }
    }
}

impl TrajectoryOptions {
    pub fn endpoints_only() -> Self {
        Self {
            snapshot_stride: 0,
            full_series: false,
        }
    }
}

/// Expectation-value time series of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    pub times: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    pub var_fz: Vec<f64>,
    pub purity: Vec<f64>,
    /// The innovations `dW` this filter computed (or consumed), one per step.
    pub innovations: Vec<f64>,
    pub snapshots: Vec<ConditionalState>,
    pub final_state: ConditionalState,
    /// False iff some step tripped the positivity flag or diverged.
    pub valid: bool,
    pub first_invalid_step: Option<usize>,
}

impl TrajectoryOutput {
    pub fn final_fz(&self) -> f64 {
        *self.fz.last().expect("series holds at least the initial point")
    }
}

enum Drive<'a> {
    Innovations(&'a [f64]),
    Record(&'a [f64]),
}

struct Series {
    out: TrajectoryOutput,
}

impl Series {
    fn new(state: &ConditionalState, ops: &SpinOperators, capacity: usize) -> Self {
        let mut s = Self {
            out: TrajectoryOutput {
                times: Vec::with_capacity(capacity),
                fx: Vec::with_capacity(capacity),
                fy: Vec::with_capacity(capacity),
                fz: Vec::with_capacity(capacity),
                var_fz: Vec::with_capacity(capacity),
                purity: Vec::with_capacity(capacity),
                innovations: Vec::with_capacity(capacity),
                snapshots: Vec::new(),
                final_state: state.clone(),
                valid: true,
                first_invalid_step: None,
            },
        };
        s.push(state, ops);
        s
    }

    fn push(&mut self, state: &ConditionalState, ops: &SpinOperators) {
        let o = &mut self.out;
        o.times.push(state.time());
        o.fx.push(state.mean(&ops.fx_band));
        o.fy.push(state.mean(&ops.fy_band));
        o.fz.push(state.mean(&ops.fz_band));
        o.var_fz.push(state.variance_fz(ops));
        o.purity.push(state.purity());
    }

    fn push_nan(&mut self, t: f64) {
        let o = &mut self.out;
        o.times.push(t);
        for v in [&mut o.fx, &mut o.fy, &mut o.fz, &mut o.var_fz, &mut o.purity] {
            v.push(f64::NAN);
        }
    }
}

fn check_inputs(rho0: &ConditionalState, ops: &SpinOperators, p: &FilterParams, n_drive: usize) -> Result<()> {
    p.validate()?;
    if rho0.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            found: rho0.dim(),
        });
    }
    if n_drive != p.n_steps {
        return Err(Error::RecordLength {
            expected: p.n_steps,
            found: n_drive,
        });
    }
    Ok(())
}

/// Runs one filter; returns its output and the record it saw.
fn run_filter(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    drive: Drive<'_>,
    opts: &TrajectoryOptions,
) -> Result<(TrajectoryOutput, Vec<f64>)> {
    let n = p.n_steps;
    let input = match drive {
        Drive::Innovations(w) => w,
        Drive::Record(z) => z,
    };
    check_inputs(rho0, ops, p, input.len())?;
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite entry in drive sequence".into()));
    }

    let capacity = if opts.full_series { n + 1 } else { 2 };
    let mut series = Series::new(rho0, ops, capacity);
    if opts.snapshot_stride > 0 {
        series.out.snapshots.push(rho0.clone());
    }
    let mut state = rho0.clone();
    let mut record = Vec::with_capacity(n);
    let mut work = Workspace::default();
    let gain = 2.0 * p.m.sqrt() * p.dt;
    let mut diverged = false;

    for step in 0..n {
        let predicted = gain * state.mean(&ops.fz_band);
        let dz = match drive {
            Drive::Innovations(w) => predicted + w[step],
            Drive::Record(z) => z[step],
        };
        let innovation = dz - predicted;
        record.push(dz);
        series.out.innovations.push(innovation);

        let stepped = match &mut state {
            ConditionalState::Density(rho) => euler_step(rho, ops, p, innovation).map(|s| {
                if !s.positive && series.out.valid {
                    series.out.valid = false;
                    series.out.first_invalid_step = Some(step);
                }
                *rho = s.rho;
            }),
            ConditionalState::Vector(psi) => split_step_in_place(psi, ops, p, dz, &mut work),
        };
        if stepped.is_err() || !state.is_finite() {
            if series.out.valid {
                series.out.first_invalid_step = Some(step);
            }
            series.out.valid = false;
            diverged = true;
            for rest in step + 1..=n {
                if opts.full_series || rest == n {
                    series.push_nan(rest as f64 * p.dt);
                }
                if rest < n {
                    record.push(f64::NAN);
                    series.out.innovations.push(f64::NAN);
                }
            }
            break;
        }

        let last = step + 1 == n;
        if opts.full_series || last {
            series.push(&state, ops);
        }
        if opts.snapshot_stride > 0 && (step + 1) % opts.snapshot_stride == 0 {
            series.out.snapshots.push(state.clone());
        }
    }
    if !diverged {
        series.out.final_state = state;
    }
    Ok((series.out, record))
}

/// Simulates the reference filter at `p.b`, drawing its innovations from
/// `noise`, and returns the photocurrent record it produces.
pub fn generate_record(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    noise: NoiseSource,
    opts: &TrajectoryOptions,
) -> Result<(MeasurementRecord, TrajectoryOutput)> {
    let dw = noise.wiener_increments(p.n_steps, p.dt)?;
    let (out, dz) = run_filter(rho0, ops, p, Drive::Innovations(&dw), opts)?;
    Ok((
        MeasurementRecord {
            dz,
            dt: p.dt,
            params_used: *p,
            noise,
        },
        out,
    ))
}

/// Runs the filter with parameters `p` (possibly a different field than the
/// one that generated the record) along an existing record.
pub fn filter_along_record(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    record: &MeasurementRecord,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryOutput> {
    if (record.dt - p.dt).abs() > 1e-15 * p.dt {
        return Err(Error::InvalidParameter(format!(
            "record step {} differs from filter step {}",
            record.dt, p.dt
        )));
    }
    run_filter(rho0, ops, p, Drive::Record(&record.dz), opts).map(|(out, _)| out)
}

/// Runs a filter driven directly by given innovations.
pub fn filter_with_innovations(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    dw: &[f64],
    opts: &TrajectoryOptions,
) -> Result<(MeasurementRecord, TrajectoryOutput)> {
    let (out, dz) = run_filter(rho0, ops, p, Drive::Innovations(dw), opts)?;
    Ok((
        MeasurementRecord {
            dz,
            dt: p.dt,
            params_used: *p,
            noise: NoiseSource::new(0, 0),
        },
        out,
    ))
}

/// Filters at `B`, `B + dB` and `B - dB` sharing one noise realization.
#[derive(Debug, Clone)]
pub struct CoupledTriple {
    pub reference: TrajectoryOutput,
    pub plus: TrajectoryOutput,
    pub minus: TrajectoryOutput,
    /// Record produced by the reference filter.
    pub record: MeasurementRecord,
    pub db: f64,
    pub sharing: NoiseSharing,
    pub valid: bool,
}

pub fn coupled_triple(
    rho0: &ConditionalState,
    ops: &SpinOperators,
    p: &FilterParams,
    db: f64,
    noise: NoiseSource,
    sharing: NoiseSharing,
    opts: &TrajectoryOptions,
) -> Result<CoupledTriple> {
    if !(db.is_finite() && db > 0.0) {
        return Err(Error::InvalidParameter(format!("dB must be positive, got {db}")));
    }
    if db > 1e-2 * p.b.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("dB = {db} is not small compared to the field")));
    }
    let p_plus = p.with_field(p.b + db);
    let p_minus = p.with_field(p.b - db);
    let (record, reference, plus, minus) = match sharing {
        NoiseSharing::Innovations => {
            let dw = noise.wiener_increments(p.n_steps, p.dt)?;
            let (reference, dz) = run_filter(rho0, ops, p, Drive::Innovations(&dw), opts)?;
            let (plus, _) = run_filter(rho0, ops, &p_plus, Drive::Innovations(&dw), opts)?;
            let (minus, _) = run_filter(rho0, ops, &p_minus, Drive::Innovations(&dw), opts)?;
            let record = MeasurementRecord {
                dz,
                dt: p.dt,
                params_used: *p,
                noise,
            };
            (record, reference, plus, minus)
        }
        NoiseSharing::Record => {
            let (record, reference) = generate_record(rho0, ops, p, noise, opts)?;
            let plus = filter_along_record(rho0, ops, &p_plus, &record, opts)?;
            let minus = filter_along_record(rho0, ops, &p_minus, &record, opts)?;
            (record, reference, plus, minus)
        }
    };
    let valid = reference.valid && plus.valid && minus.valid;
    Ok(CoupledTriple {
        reference,
        plus,
        minus,
        record,
        db,
        sharing,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_spin_operators, SpinQuantum};
    use crate::state::{coherent_state_x, coherent_vector_x, DensityMatrix, StateVector};

    fn ops(f: f64) -> SpinOperators {
        build_spin_operators(SpinQuantum::new(f).unwrap()).unwrap()
    }

    fn vector0(o: &SpinOperators) -> ConditionalState {
        ConditionalState::Vector(coherent_vector_x(o))
    }

    fn density0(o: &SpinOperators) -> ConditionalState {
        ConditionalState::Density(coherent_state_x(o))
    }

    #[test]
    fn unmeasured_record_is_pure_noise() {
        let o = ops(3.0);
        let p = FilterParams::new(0.1, 1.0, 0.0, 0.0, 1.0, 1e-3).unwrap();
        let noise = NoiseSource::new(9, 0);
        let (rec, _) = generate_record(&vector0(&o), &o, &p, noise, &Default::default()).unwrap();
        assert_eq!(rec.dz, noise.wiener_increments(p.n_steps, p.dt).unwrap());
    }

    #[test]
    fn record_drift_at_top_state() {
        let o = ops(5.0);
        let p = FilterParams::new(0.0, 1.0, 1.0, 0.0, 1.0, 1e-3).unwrap();
        let top = ConditionalState::Vector(StateVector::basis(o.spin(), 0).unwrap());
        let dw = vec![0.0; p.n_steps];
        let (rec, _) = filter_with_innovations(&top, &o, &p, &dw, &Default::default()).unwrap();
        assert!((rec.dz[0] - 2.0 * 5.0 * p.dt).abs() < 1e-15);
    }

    #[test]
    fn refiltering_reproduces_reference_bit_for_bit() {
        let o = ops(4.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 0.01, 1.0, 1e-3).unwrap();
        for rho0 in [vector0(&o), density0(&o)] {
            let (rec, reference) = generate_record(&rho0, &o, &p, NoiseSource::new(3, 1), &Default::default()).unwrap();
            let again = filter_along_record(&rho0, &o, &p, &rec, &Default::default()).unwrap();
            assert_eq!(reference, again);
            let twice = filter_along_record(&rho0, &o, &p, &rec, &Default::default()).unwrap();
            assert_eq!(again, twice);
        }
    }

    #[test]
    fn unmeasured_filter_ignores_record() {
        let o = ops(4.0);
        let p = FilterParams::new(0.1, 1.0, 0.0, 0.0, 1.0, 1e-3).unwrap();
        let (rec_a, _) = generate_record(&vector0(&o), &o, &p, NoiseSource::new(1, 0), &Default::default()).unwrap();
        let (rec_b, _) = generate_record(&vector0(&o), &o, &p, NoiseSource::new(2, 0), &Default::default()).unwrap();
        let a = filter_along_record(&vector0(&o), &o, &p, &rec_a, &Default::default()).unwrap();
        let b = filter_along_record(&vector0(&o), &o, &p, &rec_b, &Default::default()).unwrap();
        assert_eq!(a.fz, b.fz);
        assert!((a.final_fz() - 4.0 * 0.1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn nearby_field_gives_small_continuous_change() {
        let o = ops(10.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 1e-3, 1.0, 1e-3).unwrap();
        let rho0 = vector0(&o);
        let opts = TrajectoryOptions::endpoints_only();
        let (rec, reference) = generate_record(&rho0, &o, &p, NoiseSource::new(5, 0), &opts).unwrap();
        let fz_at = |db: f64| {
            filter_along_record(&rho0, &o, &p.with_field(0.1 + db), &rec, &opts)
                .unwrap()
                .final_fz()
        };
        let h = 1e-4;
        let slope = (fz_at(h) - fz_at(-h)) / (2.0 * h);
        let shift = fz_at(1e-6) - reference.final_fz();
        assert!(shift != 0.0);
        assert!((shift - 1e-6 * slope).abs() < 1e-2 * (1e-6 * slope).abs() + 1e-12, "{shift} vs {}", 1e-6 * slope);
    }

    #[test]
    fn record_length_mismatch() {
        let o = ops(2.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 0.0, 1.0, 1e-3).unwrap();
        let (mut rec, _) = generate_record(&vector0(&o), &o, &p, NoiseSource::new(5, 0), &Default::default()).unwrap();
        rec.dz.pop();
        assert!(matches!(
            filter_along_record(&vector0(&o), &o, &p, &rec, &Default::default()),
            Err(Error::RecordLength { .. })
        ));
    }

    #[test]
    fn unmeasured_triple_is_rotation() {
        let o = ops(6.0);
        let p = FilterParams::new(0.1, 1.0, 0.0, 0.0, 1.0, 1e-3).unwrap();
        for sharing in [NoiseSharing::Innovations, NoiseSharing::Record] {
            let t = coupled_triple(&vector0(&o), &o, &p, 1e-3, NoiseSource::new(1, 0), sharing, &Default::default()).unwrap();
            assert!((t.plus.final_fz() - 6.0 * 0.101f64.sin()).abs() < 1e-10);
            assert!((t.minus.final_fz() - 6.0 * 0.099f64.sin()).abs() < 1e-10);
            assert!(t.valid);
        }
    }

    #[test]
    fn triple_reference_matches_generator() {
        let o = ops(5.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 1e-3, 1.0, 1e-3).unwrap();
        let noise = NoiseSource::new(8, 2);
        for sharing in [NoiseSharing::Innovations, NoiseSharing::Record] {
            let t = coupled_triple(&vector0(&o), &o, &p, 1e-6, noise, sharing, &Default::default()).unwrap();
            let (rec, reference) = generate_record(&vector0(&o), &o, &p, noise, &Default::default()).unwrap();
            assert_eq!(t.reference, reference);
            assert_eq!(t.record.dz, rec.dz);
        }
    }

    #[test]
    fn triple_sharing_modes_differ_as_designed() {
        let o = ops(5.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 1e-2, 1.0, 1e-3).unwrap();
        let noise = NoiseSource::new(8, 2);
        let innov = coupled_triple(&vector0(&o), &o, &p, 1e-6, noise, NoiseSharing::Innovations, &Default::default()).unwrap();
        let max_gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(max_gap(&innov.plus.innovations, &innov.reference.innovations) < 1e-12);
        assert_ne!(innov.plus.final_fz(), innov.reference.final_fz());
        let rec = coupled_triple(&vector0(&o), &o, &p, 1e-6, noise, NoiseSharing::Record, &Default::default()).unwrap();
        assert!(max_gap(&rec.plus.innovations, &rec.reference.innovations) > 1e-12);
        assert_eq!(rec.plus.innovations.len(), p.n_steps);
    }

    #[test]
    fn positivity_failure_invalidates_density_run() {
        let o = ops(20.0);
        let p = FilterParams::new(0.1, 1.0, 50.0, 0.0, 1.0, 1e-2).unwrap();
        let (_, out) = generate_record(&density0(&o), &o, &p, NoiseSource::new(1, 0), &Default::default()).unwrap();
        assert!(!out.valid);
        assert!(out.first_invalid_step.is_some());
        let lens = [out.times.len(), out.fx.len(), out.fz.len(), out.var_fz.len(), out.purity.len()];
        assert!(lens.iter().all(|&l| l == p.n_steps + 1));
        let t = coupled_triple(&density0(&o), &o, &p, 1e-6, NoiseSource::new(1, 0), NoiseSharing::Innovations, &Default::default()).unwrap();
        assert!(!t.valid);
    }

    #[test]
    fn snapshots_and_series_lengths() {
        let o = ops(2.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 0.0, 1.0, 1e-3).unwrap();
        let opts = TrajectoryOptions {
            snapshot_stride: 100,
            full_series: true,
        };
        let (rec, out) = generate_record(&density0(&o), &o, &p, NoiseSource::new(1, 0), &opts).unwrap();
        assert_eq!(rec.dz.len(), p.n_steps);
        assert_eq!(out.snapshots.len(), 11);
        assert_eq!(out.fz.len(), p.n_steps + 1);
        assert_eq!(out.innovations.len(), p.n_steps);
        let rho: &DensityMatrix = match &out.snapshots[10] {
            ConditionalState::Density(d) => d,
            _ => unreachable!(),
        };
        assert!((rho.time - 1.0).abs() < 1e-9);
        let (_, ends) = generate_record(&density0(&o), &o, &p, NoiseSource::new(1, 0), &TrajectoryOptions::endpoints_only()).unwrap();
        assert_eq!(ends.fz.len(), 2);
        assert_eq!(ends.final_fz(), out.final_fz());
    }

    #[test]
    fn rejects_bad_db() {
        let o = ops(2.0);
        let p = FilterParams::new(0.1, 1.0, 1.0, 0.0, 1.0, 1e-3).unwrap();
        for db in [0.0, -1e-6, 0.5, f64::NAN] {
            assert!(coupled_triple(&vector0(&o), &o, &p, db, NoiseSource::new(1, 0), NoiseSharing::Record, &Default::default()).is_err());
        }
    }
}
