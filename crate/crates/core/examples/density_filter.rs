//! The conditional master equation stepped on a density matrix, next to the
//! pure-state propagator on the same Wiener path. Prints the largest
//! negative eigenvalue seen, which is what the positivity flag monitors.
//!
//! `cargo run --release --example density_filter -- [F] [dt]`

use doublepass::filter::{euler_step, FilterParams};
use doublepass::noise::NoiseSource;
use doublepass::propagator::{split_step_in_place, Workspace};
use doublepass::spin::{build_spin_operators, SpinQuantum};
use doublepass::state::{coherent_state_x, coherent_vector_x, expectation};

fn main() -> doublepass::Result<()> {
    let mut args = std::env::args().skip(1);
    let f: f64 = args.next().map_or(3.0, |s| s.parse().expect("F"));
    let dt: f64 = args.next().map_or(1e-4, |s| s.parse().expect("dt"));

    let ops = build_spin_operators(SpinQuantum::new(f)?)?;
    let p = FilterParams::new(0.4, 1.0, 1.0, 0.05, 1.0, dt)?;
    let dw = NoiseSource::new(7, 0).wiener_increments(p.n_steps, p.dt)?;

    let mut rho = coherent_state_x(&ops);
    let mut psi = coherent_vector_x(&ops);
    let mut work = Workspace::default();
    let mut worst: f64 = 0.0;
    let mut flagged = None;
    for (step, &w) in dw.iter().enumerate() {
        let dz = 2.0 * p.m.sqrt() * psi.mean(&ops.fz_band) * p.dt + w;
        split_step_in_place(&mut psi, &ops, &p, dz, &mut work)?;
        let next = euler_step(&rho, &ops, &p, w)?;
        if !next.positive && flagged.is_none() {
            flagged = Some(step);
        }
        rho = next.rho;
        worst = worst.min(rho.min_eigenvalue());
        if (step + 1) % (p.n_steps / 5) == 0 {
            println!(
                "t = {:.2}: <F_z> density {:+.5}, vector {:+.5}; purity {:.6}",
                rho.time,
                expectation(&ops.fz, &rho)?.re,
                psi.mean(&ops.fz_band),
                rho.purity()
            );
        }
    }
    println!("most negative eigenvalue {worst:.3e}");
    match flagged {
        Some(step) => println!("positivity flag first raised at step {step}"),
        None => println!("positivity flag never raised"),
    }
    Ok(())
}
