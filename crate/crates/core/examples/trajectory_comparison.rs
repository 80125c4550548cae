//! Double-pass versus single-pass filtering of one measurement realization.
//!
//! Both filters see the same innovations; the single-pass one has `K = 0`.
//! Prints `<F_z>` and `Var(F_z)` at a few times and how often, over several
//! seeds, the double-pass signal ends up larger.
//!
//! `cargo run --release --example trajectory_comparison -- [F] [seeds]`

use doublepass::engine::{filter_with_innovations, TrajectoryOptions};
use doublepass::experiments::EnsembleSettings;
use doublepass::noise::NoiseSource;
use doublepass::spin::{build_spin_operators, SpinQuantum};
use doublepass::state::{coherent_vector_x, ConditionalState};

fn main() -> doublepass::Result<()> {
    let mut args = std::env::args().skip(1);
    let f: f64 = args.next().map_or(100.0, |s| s.parse().expect("F"));
    let seeds: u64 = args.next().map_or(20, |s| s.parse().expect("seed count"));

    let ops = build_spin_operators(SpinQuantum::new(f)?)?;
    let p = EnsembleSettings::default().params(1.0, 1e-4)?;
    let rho0 = ConditionalState::Vector(coherent_vector_x(&ops));

    let mut larger = 0;
    for seed in 0..seeds {
        let dw = NoiseSource::new(seed, 0).wiener_increments(p.n_steps, p.dt)?;
        let opts = TrajectoryOptions::default();
        let (_, double) = filter_with_innovations(&rho0, &ops, &p, &dw, &opts)?;
        let (_, single) = filter_with_innovations(&rho0, &ops, &p.with_rates(p.m, 0.0), &dw, &opts)?;
        if seed == 0 {
            println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "fz double", "var double", "fz single", "var single");
            for i in (0..double.times.len()).step_by(p.n_steps / 10) {
                println!(
                    "{:>6.2} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                    double.times[i], double.fz[i], double.var_fz[i], single.fz[i], single.var_fz[i]
                );
            }
        }
        if double.final_fz().abs() > single.final_fz().abs() {
            larger += 1;
        }
    }
    println!("double-pass |<F_z>(tau)| larger for {larger} of {seeds} seeds");
    Ok(())
}
