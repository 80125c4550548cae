//! Ensemble quantum Fisher information at a single operating point, with the
//! spread of conditional values and both error-bar conventions.
//!
//! `cargo run --release --example qfi_point -- [F] [M] [K] [trajectories]`

use doublepass::engine::NoiseSharing;
use doublepass::experiments::{qfi_point, EnsembleSettings};
use doublepass::fisher::reference_bounds;
use doublepass::spin::SpinQuantum;

fn main() -> doublepass::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("number")).collect();
    let f = args.first().copied().unwrap_or(60.0);
    let m = args.get(1).copied().unwrap_or(1.0);
    let k = args.get(2).copied().unwrap_or(1e-4);
    let n = args.get(3).copied().unwrap_or(50.0) as usize;

    let refs = reference_bounds(f, 1.0, 1.0)?;
    for sharing in [NoiseSharing::Innovations, NoiseSharing::Record] {
        let s = EnsembleSettings {
            n_trajectories: n,
            sharing,
            ..Default::default()
        };
        let point = qfi_point(SpinQuantum::new(f)?, m, k, &s)?;
        let e = &point.estimate;
        let mut sorted = e.samples.clone();
        sorted.sort_by(f64::total_cmp);
        println!("{sharing:?} sharing, F = {f}, M = {m}, K = {k}, {n} triples");
        println!("  mean QFI {:.4e} (sem {:.2e}), median {:.4e}", e.mean, e.sem, sorted[sorted.len() / 2]);
        println!(
            "  deltaB {:.4e} +- {:.2e} (sem) / {:.2e} (raw sigma)",
            e.delta_b, e.delta_b_err, e.delta_b_err_raw
        );
        println!("  excluded {}, purity-flagged {}", e.n_excluded, point.n_purity_flagged);
    }
    println!(
        "references: shotnoise {:.4e}, heisenberg {:.4e}, two-body {:.4e}",
        refs.shotnoise, refs.heisenberg, refs.two_body
    );
    Ok(())
}
