//! `M = K = c / (tau F^alpha)` over a decade of spin sizes and the log-log
//! slope of the field uncertainty.
//!
//! `cargo run --release --example scaling_law -- [trajectories] [c] [alpha]`

use doublepass::experiments::{
    log_spaced_spins, powerlaw_fit, run_sweep, CouplingSchedule, EnsembleSettings, SweepConfig,
};

fn main() -> doublepass::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(50, |s| s.parse().expect("trajectory count"));
    let c: f64 = args.next().map_or(0.589, |s| s.parse().expect("c"));
    let alpha: f64 = args.next().map_or(0.77, |s| s.parse().expect("alpha"));
    let cfg = SweepConfig {
        f_values: log_spaced_spins(10.0, 120.0, 8)?,
        schedule: CouplingSchedule::ScalingLaw { c, alpha },
        ensemble: EnsembleSettings {
            n_trajectories: n,
            ..Default::default()
        },
        spin_per_atom: 0.5,
    };
    let result = run_sweep(&cfg)?;
    for r in &result.rows {
        println!("F = {:>6}  M = K = {:.4}  deltaB = {:.4e} +- {:.1e}", r.f, r.m, r.delta_b, r.delta_b_err);
    }
    let fit = powerlaw_fit(&result.rows.iter().map(|r| (r.f, r.delta_b)).collect::<Vec<_>>())?;
    println!(
        "log10 deltaB = {:.4} log10 F + {:.4}   (residual rms {:.2e})",
        fit.slope, fit.intercept, fit.residual_rms
    );
    Ok(())
}
