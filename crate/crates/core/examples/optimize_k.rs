//! Scans the feedback strength `K` on a log grid at fixed `F` and `M`, then
//! refines around the best grid point.
//!
//! `cargo run --release --example optimize_k -- [F] [trajectories]`

use doublepass::experiments::{optimize_k, EnsembleSettings, KGrid};
use doublepass::spin::SpinQuantum;

fn main() -> doublepass::Result<()> {
    let mut args = std::env::args().skip(1);
    let f: f64 = args.next().map_or(40.0, |s| s.parse().expect("F"));
    let n: usize = args.next().map_or(20, |s| s.parse().expect("trajectory count"));
    let s = EnsembleSettings {
        n_trajectories: n,
        ..Default::default()
    };
    let opt = optimize_k(SpinQuantum::new(f)?, 1.0, &s, &KGrid::default())?;
    for e in &opt.evaluations {
        println!("K = {:.3e}  QFI = {:.4e} +- {:.1e}", e.k, e.qfi, e.sem);
    }
    println!("K* = {:.3e}, QFI = {:.4e}{}", opt.k_star, opt.qfi_at_k_star, if opt.warning { " (warning: multimodal profile)" } else { "" });
    Ok(())
}
