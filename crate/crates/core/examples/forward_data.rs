//! Exact boundary data from the two-layer disk, with optional measurement noise.
//!
//! `cargo run --example forward_data [eta_a] [gamma] [seed]`

use rytov::forward::{add_noise, boundary_fields, log_ratio, solve_layer_coefficients};
use rytov::model::ProblemConfig;

fn main() -> rytov::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let eta_a: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let gamma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = ProblemConfig::disk_benchmark(eta_a);

    let c = solve_layer_coefficients(1, &cfg)?;
    println!("alpha 1: k_a = {:.6}, cond = {:.2e}, residual = {:.2e}", c.k_a, c.condition, c.residual);

    let (u0, u) = boundary_fields(&cfg)?;
    let clean = log_ratio(&u0, &u)?;
    let noisy = add_noise(&u0, &u, gamma, seed)?;
    let dirty = log_ratio(&noisy.u0, &noisy.u)?;
    println!("noise sigma = {:.3e}, skipped draws = {}", noisy.sigma, noisy.skipped);

    println!("{:>5} {:>14} {:>14} {:>14} {:>14}", "alpha", "u0", "u", "psi", "psi (noisy)");
    for a in [1usize, 2, 3, 5, 8, 12, 20, 40, 90] {
        println!(
            "{a:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            u0[a - 1],
            u[a - 1],
            clean.values[a - 1],
            dirty.values[a - 1]
        );
    }
    Ok(())
}
