//! Field uncertainty against spin size at fixed `M` and `K`, with the
//! reference scalings and the detected saturation point.
//!
//! `cargo run --release --example saturation_sweep -- [trajectories] [K]`

use doublepass::experiments::{detect_saturation, run_sweep, CouplingSchedule, EnsembleSettings, SweepConfig};

fn main() -> doublepass::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(20, |s| s.parse().expect("trajectory count"));
    let k: f64 = args.next().map_or(1e-4, |s| s.parse().expect("K"));
    let cfg = SweepConfig {
        f_values: (1..=10).map(|i| 20.0 * i as f64).collect(),
        schedule: CouplingSchedule::FixedMk { m: 1.0, k },
        ensemble: EnsembleSettings {
            n_trajectories: n,
            ..Default::default()
        },
        spin_per_atom: 0.5,
    };
    let result = run_sweep(&cfg)?;
    println!("{:>5} {:>12} {:>10} {:>12} {:>12} {:>12}", "F", "deltaB", "err", "shotnoise", "heisenberg", "two-body");
    for r in &result.rows {
        println!(
            "{:>5} {:>12.4e} {:>10.2e} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.f, r.delta_b, r.delta_b_err, r.refs.shotnoise, r.refs.heisenberg, r.refs.two_body
        );
    }
    let points: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.f, r.delta_b)).collect();
    match detect_saturation(&points) {
        Some(s) => println!("saturates at F = {} (deltaB = {:.4e})", s.f, s.delta_b),
        None => println!("no saturation within the swept range"),
    }
    Ok(())
}
