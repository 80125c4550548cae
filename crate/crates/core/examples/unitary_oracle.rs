//! Without measurement the conditional Fisher information is the same for
//! every realization and equals `4 gamma^2 tau^2 Var(F_y) = 2F` for a
//! coherent state along x. This runs the full coupled-trajectory pipeline
//! with `M = K = 0` and compares against that value.
//!
//! `cargo run --release --example unitary_oracle`

use doublepass::experiments::{qfi_point, EnsembleSettings};
use doublepass::fisher::{analytic_unitary_qfi, reference_bounds};
use doublepass::spin::{build_spin_operators, SpinQuantum};
use doublepass::state::coherent_state_x;

fn main() -> doublepass::Result<()> {
    let s = EnsembleSettings {
        n_trajectories: 4,
        ..Default::default()
    };
    println!("{:>6} {:>14} {:>14} {:>12} {:>12}", "F", "QFI", "analytic", "deltaB", "shotnoise");
    for f in [0.5, 1.0, 5.0, 25.0, 100.0] {
        let spin = SpinQuantum::new(f)?;
        let ops = build_spin_operators(spin)?;
        let analytic = analytic_unitary_qfi(&coherent_state_x(&ops), &ops, s.gamma, s.tau)?;
        let point = qfi_point(spin, 0.0, 0.0, &s)?;
        let shot = reference_bounds(f, s.gamma, s.tau)?.shotnoise;
        println!(
            "{f:>6} {:>14.8} {:>14.8} {:>12.6e} {:>12.6e}",
            point.estimate.mean, analytic, point.estimate.delta_b, shot
        );
    }
    Ok(())
}
